//! Structural model of Java test sources, built on tree-sitter.
//!
//! `parse_file` turns one source file into `TestClassModel`s; a class is kept
//! only when it carries at least one test-marker-annotated method. Methods of
//! nested and anonymous classes are folded into the enclosing test class as
//! helper methods, so tag-sheet expansion stays within the test-class scope.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::Serialize;
use tree_sitter::{Node, Parser};
use walkdir::WalkDir;

use crate::config::RuleConfig;
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
    #[serde(skip)]
    pub start_byte: usize,
    #[serde(skip)]
    pub end_byte: usize,
}

impl SourceSpan {
    fn of(node: Node) -> Self {
        SourceSpan {
            start_line: node.start_position().row + 1,
            start_col: node.start_position().column + 1,
            end_line: node.end_position().row + 1,
            end_col: node.end_position().column + 1,
            start_byte: node.start_byte(),
            end_byte: node.end_byte(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatementKind {
    Invocation,
    DeclarationWithInit,
    Assignment,
    Conditional,
    Loop,
    TryBlock,
    Return,
    Throw,
    Other,
}

impl StatementKind {
    pub fn is_control_flow(self) -> bool {
        matches!(
            self,
            StatementKind::Conditional | StatementKind::Loop | StatementKind::TryBlock
        )
    }
}

/// Best-effort description of the method or constructor a statement invokes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Callee {
    pub receiver: Option<String>,
    /// Declared type of the receiver variable, when resolvable in scope.
    pub receiver_type: Option<String>,
    pub name: String,
    /// Receiver looks like a type name rather than a variable in scope.
    pub static_guess: bool,
    pub constructor: bool,
    pub args: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatchHandler {
    pub exception_types: Vec<String>,
    pub param: String,
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TryInfo {
    /// Verbatim resource specification of a try-with-resources, parens included.
    pub resources: Option<String>,
    pub handlers: Vec<CatchHandler>,
    pub finally_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Statement {
    pub kind: StatementKind,
    /// Primary invocation: the outermost call of an invocation statement or
    /// the call inside a declaration initializer / assignment right-hand side.
    pub callee: Option<Callee>,
    /// Every invocation in this statement's own expressions (children excluded).
    pub callees: Vec<Callee>,
    pub children: Vec<Statement>,
    /// Else-branch statements of a conditional.
    pub else_children: Vec<Statement>,
    pub try_info: Option<TryInfo>,
    pub text: String,
    pub line: usize,
    pub span: SourceSpan,
    /// Variable declared or assigned by this statement.
    pub defines: Option<String>,
    pub declared_type: Option<String>,
    /// Identifiers referenced in this statement's expressions.
    pub refs: Vec<String>,
    pub returns_value: bool,
}

impl Statement {
    /// All callees in this statement and its nested children and handlers.
    pub fn all_callees(&self) -> Vec<&Callee> {
        let mut out: Vec<&Callee> = self.callees.iter().collect();
        for child in self.children.iter().chain(self.else_children.iter()) {
            out.extend(child.all_callees());
        }
        if let Some(info) = &self.try_info {
            for h in &info.handlers {
                for s in &h.statements {
                    out.extend(s.all_callees());
                }
            }
        }
        out
    }

    /// Callees of the try body and nested children, excluding catch handlers.
    pub fn body_callees(&self) -> Vec<&Callee> {
        let mut out: Vec<&Callee> = self.callees.iter().collect();
        for child in self.children.iter().chain(self.else_children.iter()) {
            out.extend(child.body_callees());
        }
        out
    }

    pub fn contains_kind(&self, kind: StatementKind) -> bool {
        self.children
            .iter()
            .chain(self.else_children.iter())
            .any(|c| c.kind == kind || c.contains_kind(kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LifecycleKind {
    BeforeEach,
    AfterEach,
    BeforeAll,
    AfterAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HelperMethod {
    pub name: String,
    pub parameters: Vec<(String, String)>,
    pub statements: Vec<Statement>,
    pub lifecycle: Option<LifecycleKind>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub name: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestCaseModel {
    pub name: String,
    pub annotations: Vec<Annotation>,
    pub statements: Vec<Statement>,
    pub throws: Vec<String>,
    pub span: SourceSpan,
    /// Span of the method body block, braces included.
    pub body_span: SourceSpan,
    /// Declared types of locals and parameters, for receiver resolution.
    pub var_types: BTreeMap<String, String>,
}

impl TestCaseModel {
    pub fn annotation(&self, name: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.name == name)
    }

    pub fn expected_exception(&self) -> Option<&String> {
        self.annotation("Test").and_then(|a| a.attributes.get("expected"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestClassModel {
    pub qualified_name: String,
    pub simple_name: String,
    pub test_methods: Vec<TestCaseModel>,
    pub lifecycle_methods: Vec<HelperMethod>,
    pub helper_methods: Vec<HelperMethod>,
    pub fields: Vec<(String, String)>,
    pub imports: Vec<String>,
    pub declared_types: Vec<String>,
}

impl TestClassModel {
    pub fn field_type(&self, name: &str) -> Option<&String> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Resolve a helper by name, disambiguating overloads by arity then
    /// declaration order.
    pub fn resolve_helper(&self, name: &str, arity: usize) -> Option<&HelperMethod> {
        self.helper_methods
            .iter()
            .find(|h| h.name == name && h.parameters.len() == arity)
            .or_else(|| self.helper_methods.iter().find(|h| h.name == name))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub classes: Vec<TestClassModel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParseFailure {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceCorpus {
    pub files: Vec<SourceFile>,
    pub failures: Vec<ParseFailure>,
    /// Type names declared anywhere under the root paths, test or production.
    pub project_types: BTreeSet<String>,
    pub roots: Vec<PathBuf>,
}

fn java_parser() -> Parser {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar");
    parser
}

fn node_text(node: Node, src: &str) -> String {
    src[node.byte_range()].to_string()
}

fn collect_identifiers(node: Node, src: &str, out: &mut Vec<String>) {
    if node.kind() == "identifier" {
        out.push(node_text(node, src));
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_identifiers(child, src, out);
    }
}

/// Collect invocations and object creations in an expression subtree,
/// without descending into lambda bodies or nested statement blocks.
fn collect_callees(node: Node, src: &str, out: &mut Vec<Callee>) {
    match node.kind() {
        "method_invocation" => {
            let name = node
                .child_by_field_name("name")
                .map(|n| node_text(n, src))
                .unwrap_or_default();
            let receiver = node.child_by_field_name("object").map(|n| node_text(n, src));
            let args = node
                .child_by_field_name("arguments")
                .map(|a| {
                    let mut cursor = a.walk();
                    a.named_children(&mut cursor)
                        .map(|c| node_text(c, src))
                        .collect()
                })
                .unwrap_or_default();
            out.push(Callee {
                receiver,
                receiver_type: None,
                name,
                static_guess: false,
                constructor: false,
                args,
                line: node.start_position().row + 1,
            });
            if let Some(obj) = node.child_by_field_name("object") {
                collect_callees(obj, src, out);
            }
            if let Some(args) = node.child_by_field_name("arguments") {
                let mut cursor = args.walk();
                for c in args.named_children(&mut cursor) {
                    collect_callees(c, src, out);
                }
            }
        }
        "object_creation_expression" => {
            let name = node
                .child_by_field_name("type")
                .map(|n| node_text(n, src))
                .unwrap_or_default();
            let args = node
                .child_by_field_name("arguments")
                .map(|a| {
                    let mut cursor = a.walk();
                    a.named_children(&mut cursor)
                        .map(|c| node_text(c, src))
                        .collect()
                })
                .unwrap_or_default();
            out.push(Callee {
                receiver: None,
                receiver_type: None,
                name,
                static_guess: false,
                constructor: true,
                args,
                line: node.start_position().row + 1,
            });
            if let Some(args) = node.child_by_field_name("arguments") {
                let mut cursor = args.walk();
                for c in args.named_children(&mut cursor) {
                    collect_callees(c, src, out);
                }
            }
        }
        "block" | "lambda_expression" | "class_body" => {}
        _ => {
            let mut cursor = node.walk();
            for child in node.children(&mut cursor) {
                collect_callees(child, src, out);
            }
        }
    }
}

fn block_statements(block: Node, src: &str) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut cursor = block.walk();
    for child in block.named_children(&mut cursor) {
        if let Some(stmt) = build_statement(child, src) {
            out.push(stmt);
        }
    }
    out
}

/// Statements of a branch that may be a block or a single statement.
fn branch_statements(node: Node, src: &str) -> Vec<Statement> {
    if node.kind() == "block" {
        block_statements(node, src)
    } else {
        build_statement(node, src).into_iter().collect()
    }
}

fn build_statement(node: Node, src: &str) -> Option<Statement> {
    let kind_name = node.kind();
    if matches!(kind_name, "line_comment" | "block_comment" | ";") {
        return None;
    }
    let span = SourceSpan::of(node);
    let line = span.start_line;
    let text = node_text(node, src);
    let mut stmt = Statement {
        kind: StatementKind::Other,
        callee: None,
        callees: Vec::new(),
        children: Vec::new(),
        else_children: Vec::new(),
        try_info: None,
        text,
        line,
        span,
        defines: None,
        declared_type: None,
        refs: Vec::new(),
        returns_value: false,
    };
    match kind_name {
        "expression_statement" => {
            let expr = node.named_child(0)?;
            match expr.kind() {
                "method_invocation" | "object_creation_expression" => {
                    stmt.kind = StatementKind::Invocation;
                    collect_callees(expr, src, &mut stmt.callees);
                    stmt.callee = stmt.callees.first().cloned();
                }
                "assignment_expression" => {
                    stmt.kind = StatementKind::Assignment;
                    if let Some(lhs) = expr.child_by_field_name("left") {
                        stmt.defines = Some(node_text(lhs, src));
                    }
                    if let Some(rhs) = expr.child_by_field_name("right") {
                        collect_callees(rhs, src, &mut stmt.callees);
                        stmt.callee = stmt.callees.first().cloned();
                    }
                }
                _ => {
                    collect_callees(expr, src, &mut stmt.callees);
                    stmt.callee = stmt.callees.first().cloned();
                    if stmt.callee.is_some() {
                        stmt.kind = StatementKind::Invocation;
                    }
                }
            }
            collect_identifiers(expr, src, &mut stmt.refs);
        }
        "local_variable_declaration" => {
            let ty = node.child_by_field_name("type").map(|n| node_text(n, src));
            stmt.declared_type = ty;
            let mut cursor = node.walk();
            let mut has_init = false;
            for child in node.named_children(&mut cursor) {
                if child.kind() == "variable_declarator" {
                    if stmt.defines.is_none() {
                        stmt.defines = child
                            .child_by_field_name("name")
                            .map(|n| node_text(n, src));
                    }
                    if let Some(value) = child.child_by_field_name("value") {
                        has_init = true;
                        collect_callees(value, src, &mut stmt.callees);
                        collect_identifiers(value, src, &mut stmt.refs);
                    }
                }
            }
            stmt.kind = if has_init {
                StatementKind::DeclarationWithInit
            } else {
                StatementKind::Other
            };
            stmt.callee = stmt.callees.first().cloned();
        }
        "if_statement" => {
            stmt.kind = StatementKind::Conditional;
            if let Some(cond) = node.child_by_field_name("condition") {
                collect_callees(cond, src, &mut stmt.callees);
                collect_identifiers(cond, src, &mut stmt.refs);
            }
            if let Some(cons) = node.child_by_field_name("consequence") {
                stmt.children = branch_statements(cons, src);
            }
            if let Some(alt) = node.child_by_field_name("alternative") {
                stmt.else_children = branch_statements(alt, src);
            }
        }
        "for_statement" | "enhanced_for_statement" | "while_statement" | "do_statement" => {
            stmt.kind = StatementKind::Loop;
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "block" {
                    stmt.children = block_statements(child, src);
                } else if !child.kind().ends_with("statement") {
                    collect_callees(child, src, &mut stmt.callees);
                    collect_identifiers(child, src, &mut stmt.refs);
                }
            }
            if stmt.children.is_empty() {
                if let Some(body) = node.child_by_field_name("body") {
                    stmt.children = branch_statements(body, src);
                }
            }
        }
        "try_statement" | "try_with_resources_statement" => {
            stmt.kind = StatementKind::TryBlock;
            let mut info = TryInfo {
                resources: None,
                handlers: Vec::new(),
                finally_text: None,
            };
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                match child.kind() {
                    "resource_specification" => {
                        info.resources = Some(node_text(child, src));
                        collect_callees(child, src, &mut stmt.callees);
                        collect_identifiers(child, src, &mut stmt.refs);
                    }
                    "block" => {
                        stmt.children = block_statements(child, src);
                    }
                    "catch_clause" => {
                        let mut types = Vec::new();
                        let mut param = String::new();
                        let mut body = Vec::new();
                        let mut c2 = child.walk();
                        for part in child.named_children(&mut c2) {
                            match part.kind() {
                                "catch_formal_parameter" => {
                                    let mut c3 = part.walk();
                                    for p in part.named_children(&mut c3) {
                                        match p.kind() {
                                            "catch_type" => {
                                                let mut c4 = p.walk();
                                                for t in p.named_children(&mut c4) {
                                                    types.push(node_text(t, src));
                                                }
                                            }
                                            "identifier" => param = node_text(p, src),
                                            _ => {}
                                        }
                                    }
                                }
                                "block" => body = block_statements(part, src),
                                _ => {}
                            }
                        }
                        info.handlers.push(CatchHandler {
                            exception_types: types,
                            param,
                            statements: body,
                        });
                    }
                    "finally_clause" => {
                        info.finally_text = Some(node_text(child, src));
                    }
                    _ => {}
                }
            }
            stmt.try_info = Some(info);
        }
        "return_statement" => {
            stmt.kind = StatementKind::Return;
            if let Some(value) = node.named_child(0) {
                stmt.returns_value = true;
                collect_callees(value, src, &mut stmt.callees);
                collect_identifiers(value, src, &mut stmt.refs);
            }
        }
        "throw_statement" => {
            stmt.kind = StatementKind::Throw;
            if let Some(value) = node.named_child(0) {
                collect_callees(value, src, &mut stmt.callees);
                collect_identifiers(value, src, &mut stmt.refs);
            }
        }
        "block" => {
            stmt.children = block_statements(node, src);
        }
        "switch_expression" | "switch_statement" | "synchronized_statement"
        | "labeled_statement" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "block" || child.kind() == "switch_block" {
                    stmt.children = block_statements(child, src);
                }
            }
        }
        _ => {
            collect_callees(node, src, &mut stmt.callees);
            collect_identifiers(node, src, &mut stmt.refs);
            if stmt.callee.is_none() {
                stmt.callee = stmt.callees.first().cloned();
            }
        }
    }
    if stmt.callee.is_none() {
        stmt.callee = match stmt.kind {
            StatementKind::Invocation | StatementKind::DeclarationWithInit
            | StatementKind::Assignment => stmt.callees.first().cloned(),
            _ => None,
        };
    }
    Some(stmt)
}

fn parse_annotation(node: Node, src: &str) -> Option<Annotation> {
    match node.kind() {
        "marker_annotation" | "annotation" => {
            let name = node.child_by_field_name("name").map(|n| node_text(n, src))?;
            let mut attributes = BTreeMap::new();
            if let Some(args) = node.child_by_field_name("arguments") {
                let mut cursor = args.walk();
                for arg in args.named_children(&mut cursor) {
                    if arg.kind() == "element_value_pair" {
                        let key = arg
                            .child_by_field_name("key")
                            .map(|n| node_text(n, src))
                            .unwrap_or_default();
                        let value = arg
                            .child_by_field_name("value")
                            .map(|n| node_text(n, src))
                            .unwrap_or_default();
                        attributes.insert(key, value);
                    } else {
                        attributes.insert("value".to_string(), node_text(arg, src));
                    }
                }
            }
            Some(Annotation { name, attributes })
        }
        _ => None,
    }
}

fn method_annotations(node: Node, src: &str) -> Vec<Annotation> {
    let mut out = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() == "modifiers" {
            let mut c2 = child.walk();
            for m in child.named_children(&mut c2) {
                if let Some(a) = parse_annotation(m, src) {
                    out.push(a);
                }
            }
        }
    }
    out
}

fn lifecycle_kind(annotations: &[Annotation]) -> Option<LifecycleKind> {
    for a in annotations {
        match a.name.as_str() {
            "Before" | "BeforeEach" => return Some(LifecycleKind::BeforeEach),
            "After" | "AfterEach" => return Some(LifecycleKind::AfterEach),
            "BeforeClass" | "BeforeAll" => return Some(LifecycleKind::BeforeAll),
            "AfterClass" | "AfterAll" => return Some(LifecycleKind::AfterAll),
            _ => {}
        }
    }
    None
}

fn method_parameters(node: Node, src: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(params) = node.child_by_field_name("parameters") {
        let mut cursor = params.walk();
        for p in params.named_children(&mut cursor) {
            if p.kind() == "formal_parameter" || p.kind() == "spread_parameter" {
                let ty = p
                    .child_by_field_name("type")
                    .map(|n| node_text(n, src))
                    .unwrap_or_default();
                let name = p
                    .child_by_field_name("name")
                    .map(|n| node_text(n, src))
                    .unwrap_or_default();
                out.push((name, ty));
            }
        }
    }
    out
}

fn method_throws(node: Node, src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() == "throws" {
            let mut c2 = child.walk();
            for t in child.named_children(&mut c2) {
                out.push(node_text(t, src));
            }
        }
    }
    out
}

/// Fill receiver types and static-call guesses using declared variable types.
fn resolve_receivers(statements: &mut [Statement], scope: &mut BTreeMap<String, String>, fields: &BTreeMap<String, String>) {
    for stmt in statements.iter_mut() {
        for callee in stmt.callees.iter_mut().chain(stmt.callee.iter_mut()) {
            if let Some(recv) = &callee.receiver {
                if let Some(ty) = scope.get(recv).or_else(|| fields.get(recv)) {
                    callee.receiver_type = Some(ty.clone());
                } else if recv
                    .chars()
                    .next()
                    .map(|c| c.is_ascii_uppercase())
                    .unwrap_or(false)
                    && !recv.contains('(')
                {
                    callee.static_guess = true;
                }
            }
        }
        if let (Some(name), Some(ty)) = (&stmt.defines, &stmt.declared_type) {
            scope.insert(name.clone(), ty.clone());
        }
        resolve_receivers(&mut stmt.children, scope, fields);
        resolve_receivers(&mut stmt.else_children, scope, fields);
        if let Some(info) = &mut stmt.try_info {
            for h in &mut info.handlers {
                resolve_receivers(&mut h.statements, scope, fields);
            }
        }
    }
}

struct ClassParts {
    tests: Vec<TestCaseModel>,
    lifecycle: Vec<HelperMethod>,
    helpers: Vec<HelperMethod>,
    fields: Vec<(String, String)>,
    declared_types: Vec<String>,
}

fn collect_class_parts(
    body: Node,
    src: &str,
    cfg: &RuleConfig,
    parts: &mut ClassParts,
    nested: bool,
) {
    let mut cursor = body.walk();
    for member in body.named_children(&mut cursor) {
        match member.kind() {
            "method_declaration" => {
                let name = member
                    .child_by_field_name("name")
                    .map(|n| node_text(n, src))
                    .unwrap_or_default();
                let annotations = method_annotations(member, src);
                let statements = member
                    .child_by_field_name("body")
                    .map(|b| block_statements(b, src))
                    .unwrap_or_default();
                let span = SourceSpan::of(member);
                let is_test = !nested
                    && annotations.iter().any(|a| cfg.test_markers.contains(&a.name));
                let lifecycle = if nested { None } else { lifecycle_kind(&annotations) };
                if is_test {
                    let body_span = member
                        .child_by_field_name("body")
                        .map(SourceSpan::of)
                        .unwrap_or(span);
                    let mut var_types: BTreeMap<String, String> =
                        method_parameters(member, src).into_iter().collect();
                    collect_var_types(&statements, &mut var_types);
                    parts.tests.push(TestCaseModel {
                        name,
                        annotations,
                        statements,
                        throws: method_throws(member, src),
                        span,
                        body_span,
                        var_types,
                    });
                } else if let Some(kind) = lifecycle {
                    parts.lifecycle.push(HelperMethod {
                        name,
                        parameters: method_parameters(member, src),
                        statements,
                        lifecycle: Some(kind),
                        span,
                    });
                } else {
                    parts.helpers.push(HelperMethod {
                        name,
                        parameters: method_parameters(member, src),
                        statements,
                        lifecycle: None,
                        span,
                    });
                }
            }
            "field_declaration" => {
                let ty = member
                    .child_by_field_name("type")
                    .map(|n| node_text(n, src))
                    .unwrap_or_default();
                let mut c2 = member.walk();
                for d in member.named_children(&mut c2) {
                    if d.kind() == "variable_declarator" {
                        if let Some(n) = d.child_by_field_name("name") {
                            parts.fields.push((node_text(n, src), ty.clone()));
                        }
                    }
                }
            }
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" => {
                if let Some(n) = member.child_by_field_name("name") {
                    parts.declared_types.push(node_text(n, src));
                }
                if let Some(inner) = member.child_by_field_name("body") {
                    collect_class_parts(inner, src, cfg, parts, true);
                }
            }
            _ => {}
        }
    }
}

fn collect_var_types(statements: &[Statement], out: &mut BTreeMap<String, String>) {
    for s in statements {
        if let (Some(name), Some(ty)) = (&s.defines, &s.declared_type) {
            out.entry(name.clone()).or_insert_with(|| ty.clone());
        }
        collect_var_types(&s.children, out);
        collect_var_types(&s.else_children, out);
    }
}

/// Parse one Java source text into the test classes it contains.
///
/// Classes without any test-marker-annotated method are dropped silently; a
/// file that cannot be parsed at all yields a `Parse` error with the location
/// of the first syntax error.
pub fn parse_file(
    path: &Path,
    content: &str,
    cfg: &RuleConfig,
) -> Result<Vec<TestClassModel>, AnalysisError> {
    let mut parser = java_parser();
    let tree = parser.parse(content, None).ok_or_else(|| AnalysisError::Parse {
        path: path.to_path_buf(),
        line: 1,
        column: 1,
        message: "parser returned no tree".to_string(),
    })?;
    let root = tree.root_node();

    let mut package = String::new();
    let mut imports = Vec::new();
    let mut classes = Vec::new();
    let mut cursor = root.walk();
    for child in root.named_children(&mut cursor) {
        match child.kind() {
            "package_declaration" => {
                if let Some(n) = child.named_child(0) {
                    package = node_text(n, src_of(content));
                }
            }
            "import_declaration" => {
                let text = node_text(child, content)
                    .trim_start_matches("import")
                    .trim()
                    .trim_end_matches(';')
                    .trim()
                    .to_string();
                imports.push(text);
            }
            "class_declaration" => {
                let simple_name = child
                    .child_by_field_name("name")
                    .map(|n| node_text(n, content))
                    .unwrap_or_default();
                let mut parts = ClassParts {
                    tests: Vec::new(),
                    lifecycle: Vec::new(),
                    helpers: Vec::new(),
                    fields: Vec::new(),
                    declared_types: vec![simple_name.clone()],
                };
                if let Some(body) = child.child_by_field_name("body") {
                    collect_class_parts(body, content, cfg, &mut parts, false);
                }
                if parts.tests.is_empty() {
                    continue;
                }
                let fields: BTreeMap<String, String> = parts.fields.iter().cloned().collect();
                for test in &mut parts.tests {
                    let mut scope: BTreeMap<String, String> = test.var_types.clone();
                    resolve_receivers(&mut test.statements, &mut scope, &fields);
                }
                for helper in parts.helpers.iter_mut().chain(parts.lifecycle.iter_mut()) {
                    let mut scope: BTreeMap<String, String> =
                        helper.parameters.iter().cloned().collect();
                    resolve_receivers(&mut helper.statements, &mut scope, &fields);
                }
                let qualified_name = if package.is_empty() {
                    simple_name.clone()
                } else {
                    format!("{package}.{simple_name}")
                };
                classes.push(TestClassModel {
                    qualified_name,
                    simple_name,
                    test_methods: parts.tests,
                    lifecycle_methods: parts.lifecycle,
                    helper_methods: parts.helpers,
                    fields: parts.fields,
                    imports: imports.clone(),
                    declared_types: parts.declared_types,
                });
            }
            _ => {}
        }
    }

    if classes.is_empty() && root.has_error() {
        let err = first_error_node(root);
        return Err(AnalysisError::Parse {
            path: path.to_path_buf(),
            line: err.map(|n| n.start_position().row + 1).unwrap_or(1),
            column: err.map(|n| n.start_position().column + 1).unwrap_or(1),
            message: "syntax error".to_string(),
        });
    }
    Ok(classes)
}

fn src_of(content: &str) -> &str {
    content
}

fn first_error_node(node: Node) -> Option<Node> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.has_error() {
            if let Some(e) = first_error_node(child) {
                return Some(e);
            }
        }
    }
    None
}

/// Integration-test heuristic: class names ending with "IT", external-command
/// wrappers, and inline SQL all disqualify a test case from unit-test scope.
pub fn is_probable_non_unit_test(
    test: &TestCaseModel,
    class: &TestClassModel,
    cfg: &RuleConfig,
) -> Option<String> {
    if class.simple_name.ends_with("IT") {
        return Some("class name ends with IT".to_string());
    }
    // markers match whole camel-case tokens, so `exec` flags `exec` and
    // `execInContainer` but not `execute`
    let tokens = |name: &str| {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in name.chars() {
            if c.is_ascii_uppercase() && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.push(c.to_ascii_lowercase());
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    };
    for stmt in &test.statements {
        for callee in stmt.all_callees() {
            if tokens(&callee.name)
                .iter()
                .any(|t| cfg.exec_markers.iter().any(|m| t == &m.to_ascii_lowercase()))
            {
                return Some(format!("external-command wrapper: {}", callee.name));
            }
        }
        let upper = stmt.text.to_ascii_uppercase();
        if cfg.sql_keywords.iter().any(|k| upper.contains(k.as_str())) {
            return Some("SQL wrapper".to_string());
        }
    }
    None
}

fn build_globset(globs: &[String]) -> Result<GlobSet, AnalysisError> {
    let mut builder = GlobSetBuilder::new();
    for g in globs {
        builder.add(Glob::new(g).map_err(|e| AnalysisError::Config(e.to_string()))?);
    }
    builder.build().map_err(|e| AnalysisError::Config(e.to_string()))
}

pub fn default_include_globs() -> Vec<String> {
    vec!["**/*Test*.java".to_string(), "**/Test*.java".to_string()]
}

impl SourceCorpus {
    /// Discover, read, and parse test files under the root paths.
    ///
    /// Parse failures are recorded as diagnostics, never aborting the run.
    /// All `.java` files (test or not) contribute declared type names to
    /// `project_types`, the proxy for "type declared in the project".
    pub fn discover(
        roots: &[PathBuf],
        include: &[String],
        exclude: &[String],
        cfg: &RuleConfig,
    ) -> Result<SourceCorpus, AnalysisError> {
        let include_set = build_globset(include)?;
        let exclude_set = build_globset(exclude)?;
        let type_decl =
            regex::Regex::new(r"\b(?:class|interface|enum|record)\s+([A-Za-z_][A-Za-z0-9_]*)")
                .expect("type decl regex");

        let mut files = Vec::new();
        let mut failures = Vec::new();
        let mut project_types = BTreeSet::new();
        let mut seen = BTreeSet::new();

        for root in roots {
            if !root.exists() {
                return Err(AnalysisError::Io {
                    path: root.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "root not found"),
                });
            }
            let mut paths: Vec<PathBuf> = WalkDir::new(root)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .filter(|p| p.extension().map(|e| e == "java").unwrap_or(false))
                .collect();
            paths.sort();
            for path in paths {
                if !seen.insert(path.clone()) {
                    continue;
                }
                let content = match std::fs::read_to_string(&path) {
                    Ok(c) => c,
                    Err(e) => {
                        failures.push(ParseFailure {
                            path,
                            line: 0,
                            column: 0,
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                for cap in type_decl.captures_iter(&content) {
                    project_types.insert(cap[1].to_string());
                }
                let rel = path.strip_prefix(root).unwrap_or(&path);
                let candidate = include_set.is_match(rel)
                    || include_set.is_match(&path)
                    || include_set.is_match(Path::new(path.file_name().unwrap_or_default()));
                if !candidate || exclude_set.is_match(rel) {
                    continue;
                }
                match parse_file(&path, &content, cfg) {
                    Ok(classes) => {
                        if !classes.is_empty() {
                            files.push(SourceFile { path, classes });
                        }
                    }
                    Err(AnalysisError::Parse {
                        path,
                        line,
                        column,
                        message,
                    }) => failures.push(ParseFailure {
                        path,
                        line,
                        column,
                        message,
                    }),
                    Err(e) => return Err(e),
                }
            }
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(SourceCorpus {
            files,
            failures,
            project_types,
            roots: roots.to_vec(),
        })
    }
}
