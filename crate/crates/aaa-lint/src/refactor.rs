//! The three automatable transforms (assert→assume, if-return→assume,
//! try-catch→throws) as concrete source edits, plus review-required split
//! drafts and suggestion-only plans.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use tree_sitter::Parser;

use crate::classifier::{block_boundaries, Classification, Symbol};
use crate::detector::{Issue, IssueKind, RefactoringKind, TestId};
use crate::source_model::{SourceSpan, Statement, StatementKind, TestCaseModel, TestClassModel};
use crate::tagger::{TagValue, TaggedSheet};
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BehaviorNote {
    Preserving,
    Strengthening,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceEdit {
    pub span: SourceSpan,
    /// Text currently at the span; checked before applying.
    pub original: String,
    pub replacement: String,
    /// Import statement body required by the replacement, e.g.
    /// "static org.junit.Assume.assumeNotNull".
    pub requires_import: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefactoringPlan {
    pub kind: RefactoringKind,
    pub target: TestId,
    pub rows: Vec<usize>,
    pub edits: Vec<SourceEdit>,
    pub automatable: bool,
    pub behavior: BehaviorNote,
    /// Rendered suggestion; for suggestion-only plans this carries the
    /// reason no edit was produced.
    pub suggestion: String,
}

impl RefactoringPlan {
    fn suggestion_only(
        kind: RefactoringKind,
        issue: &Issue,
        behavior: BehaviorNote,
        reason: impl fmt::Display,
    ) -> RefactoringPlan {
        RefactoringPlan {
            kind,
            target: issue.test_id.clone(),
            rows: issue.evidence_rows.iter().map(|(r, _)| *r).collect(),
            edits: Vec::new(),
            automatable: false,
            behavior,
            suggestion: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Framework {
    JUnit4,
    JUnit5,
}

fn framework(class: &TestClassModel) -> Framework {
    if class.imports.iter().any(|i| i.starts_with("org.junit.jupiter")) {
        Framework::JUnit5
    } else if class.imports.iter().any(|i| i.starts_with("org.junit.")) {
        Framework::JUnit4
    } else {
        Framework::JUnit5
    }
}

fn assume_import(framework: Framework, name: &str) -> String {
    match framework {
        Framework::JUnit4 => format!("static org.junit.Assume.{name}"),
        Framework::JUnit5 => format!("static org.junit.jupiter.api.Assumptions.{name}"),
    }
}

/// Assumption call replacing an assert precondition, or None when the
/// assert form has no counterpart in the default table.
fn assume_call(fw: Framework, callee: &str, args: &[String]) -> Option<(String, String)> {
    let arglist = args.join(", ");
    match (fw, callee) {
        (Framework::JUnit4, "assertNotNull") => {
            Some((format!("assumeNotNull({arglist})"), "assumeNotNull".into()))
        }
        (Framework::JUnit5, "assertNotNull") => Some((
            format!("assumeTrue({arglist} != null)"),
            "assumeTrue".into(),
        )),
        (_, "assertTrue") => Some((format!("assumeTrue({arglist})"), "assumeTrue".into())),
        (_, "assertFalse") => Some((format!("assumeFalse({arglist})"), "assumeFalse".into())),
        (_, "assertEquals") if args.len() == 2 => Some((
            format!("assumeTrue(java.util.Objects.equals({arglist}))"),
            "assumeTrue".into(),
        )),
        _ => None,
    }
}

/// Replace the precondition assert by its assumption counterpart; an
/// adjacent print row following the assert is removed with it.
pub fn plan_assert_to_assume(
    issue: &Issue,
    ts: &TaggedSheet,
    class: &TestClassModel,
) -> RefactoringPlan {
    debug_assert_eq!(issue.kind, IssueKind::AssertPrecondition);
    let fw = framework(class);
    let mut edits = Vec::new();
    let mut rows = Vec::new();
    for (row, _) in &issue.evidence_rows {
        let exp = &ts.sheet.rows[*row];
        if exp.depth > 0 {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::ReplaceAssertWithAssume,
                issue,
                BehaviorNote::Strengthening,
                "precondition assert sits inside a shared helper; replace it with an \
                 assumption at the call sites instead",
            );
        }
        let stmt = &exp.statement;
        let callee = stmt.callee.as_ref();
        let mapped = callee.and_then(|c| assume_call(fw, &c.name, &c.args));
        let Some((call, import_name)) = mapped else {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::ReplaceAssertWithAssume,
                issue,
                BehaviorNote::Strengthening,
                format!(
                    "no assumption counterpart for `{}`; rewrite the precondition as an \
                     assumption manually",
                    callee.map(|c| c.name.as_str()).unwrap_or("<unknown>")
                ),
            );
        };
        edits.push(SourceEdit {
            span: stmt.span,
            original: stmt.text.clone(),
            replacement: format!("{call};"),
            requires_import: Some(assume_import(fw, &import_name)),
        });
        rows.push(*row);
        // the ticket pattern: a print right after the precondition goes too
        if let Some(next) = ts.sheet.rows.get(row + 1) {
            let is_print = next.depth == 0
                && next
                    .statement
                    .callee
                    .as_ref()
                    .map_or(false, |c| c.name.starts_with("print"));
            if is_print {
                edits.push(SourceEdit {
                    span: next.statement.span,
                    original: next.statement.text.clone(),
                    replacement: String::new(),
                    requires_import: None,
                });
                rows.push(row + 1);
            }
        }
    }
    RefactoringPlan {
        kind: RefactoringKind::ReplaceAssertWithAssume,
        target: issue.test_id.clone(),
        rows,
        edits,
        automatable: true,
        behavior: BehaviorNote::Strengthening,
        suggestion: "replace the precondition assert with an assumption so an unmet \
                     precondition skips rather than fails the test"
            .to_string(),
    }
}

/// Condition text of an `if` statement, by balanced-paren scan of its text.
fn condition_text(stmt: &Statement) -> Option<String> {
    let open = stmt.text.find('(')?;
    let mut depth = 0usize;
    for (i, c) in stmt.text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(stmt.text[open + 1..open + i].trim().to_string());
                }
            }
            _ => {}
        }
    }
    None
}

fn null_check_subject(cond: &str) -> Option<&str> {
    let (lhs, rhs) = cond.split_once("==")?;
    let (lhs, rhs) = (lhs.trim(), rhs.trim());
    let ident = |s: &str| {
        !s.is_empty()
            && s.chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
    };
    if rhs == "null" && ident(lhs) {
        Some(lhs)
    } else if lhs == "null" && ident(rhs) {
        Some(rhs)
    } else {
        None
    }
}

fn side_effecting(cond: &str) -> bool {
    cond.contains("++")
        || cond.contains("--")
        || cond
            .char_indices()
            .any(|(i, c)| {
                c == '='
                    && cond.as_bytes().get(i + 1) != Some(&b'=')
                    && !matches!(
                        cond.as_bytes().get(i.wrapping_sub(1)),
                        Some(b'=') | Some(b'!') | Some(b'<') | Some(b'>')
                    )
            })
}

/// Replace the if-return guard by the equivalent assumption.
pub fn plan_if_return_to_assume(
    issue: &Issue,
    ts: &TaggedSheet,
    class: &TestClassModel,
) -> RefactoringPlan {
    debug_assert_eq!(issue.kind, IssueKind::ArrangeAndQuit);
    let fw = framework(class);
    let mut edits = Vec::new();
    let mut rows = Vec::new();
    for (row, _) in &issue.evidence_rows {
        let exp = &ts.sheet.rows[*row];
        let stmt = &exp.statement;
        let returns_value = stmt
            .children
            .first()
            .map_or(false, |c| c.returns_value);
        let cond = condition_text(stmt);
        if exp.depth > 0 || returns_value || cond.is_none() {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::ReplaceIfReturnWithAssume,
                issue,
                BehaviorNote::Strengthening,
                "guard is not a top-level bare if-return; rewrite it as an assumption \
                 manually",
            );
        }
        let cond = cond.unwrap();
        if side_effecting(&cond) {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::ReplaceIfReturnWithAssume,
                issue,
                BehaviorNote::Strengthening,
                "guard condition has side effects; rewrite it as an assumption manually",
            );
        }
        let (call, import_name) = match (null_check_subject(&cond), fw) {
            (Some(subject), Framework::JUnit4) => {
                (format!("assumeNotNull({subject});"), "assumeNotNull")
            }
            (Some(subject), Framework::JUnit5) => {
                (format!("assumeTrue({subject} != null);"), "assumeTrue")
            }
            (None, _) => (format!("assumeFalse({cond});"), "assumeFalse"),
        };
        edits.push(SourceEdit {
            span: stmt.span,
            original: stmt.text.clone(),
            replacement: call,
            requires_import: Some(assume_import(fw, import_name)),
        });
        rows.push(*row);
    }
    RefactoringPlan {
        kind: RefactoringKind::ReplaceIfReturnWithAssume,
        target: issue.test_id.clone(),
        rows,
        edits,
        automatable: true,
        behavior: BehaviorNote::Strengthening,
        suggestion: "replace the silent if-return guard with an assumption so the \
                     precondition is reported instead of hidden"
            .to_string(),
    }
}

fn indent_of(stmt: &Statement) -> String {
    " ".repeat(stmt.span.start_col.saturating_sub(1))
}

/// Remove the suppressing catch, keep the try body (and any finally or
/// resource header), and extend the throws clause with the caught types.
pub fn plan_remove_catch(
    issue: &Issue,
    ts: &TaggedSheet,
    t: &TestCaseModel,
    content: &str,
) -> RefactoringPlan {
    debug_assert_eq!(issue.kind, IssueKind::SuppressedException);
    let mut edits = Vec::new();
    let mut rows = Vec::new();
    let mut new_throws: Vec<String> = Vec::new();
    for (row, _) in &issue.evidence_rows {
        let exp = &ts.sheet.rows[*row];
        let stmt = &exp.statement;
        let info = stmt.try_info.as_ref();
        if exp.depth > 0 || info.is_none() {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::RemoveCatchAddThrows,
                issue,
                BehaviorNote::Strengthening,
                "suppressing catch is not a top-level try; remove it manually",
            );
        }
        let info = info.unwrap();
        let captures_state = info.handlers.iter().any(|h| {
            h.statements.iter().any(|s| {
                matches!(
                    s.kind,
                    StatementKind::Assignment | StatementKind::DeclarationWithInit
                )
            })
        });
        if captures_state {
            return RefactoringPlan::suggestion_only(
                RefactoringKind::RemoveCatchAddThrows,
                issue,
                BehaviorNote::Strengthening,
                "catch block stores the exception for later use; untangle it manually",
            );
        }
        let indent = indent_of(stmt);
        let body = stmt
            .children
            .iter()
            .map(|c| c.text.clone())
            .collect::<Vec<_>>()
            .join(&format!("\n{indent}"));
        let replacement = match (&info.resources, &info.finally_text) {
            (Some(res), None) => format!("try {res} {{\n{indent}    {body}\n{indent}}}"),
            (Some(res), Some(fin)) => {
                format!("try {res} {{\n{indent}    {body}\n{indent}}} {fin}")
            }
            (None, Some(fin)) => format!("try {{\n{indent}    {body}\n{indent}}} {fin}"),
            (None, None) => body,
        };
        edits.push(SourceEdit {
            span: stmt.span,
            original: stmt.text.clone(),
            replacement,
            requires_import: None,
        });
        rows.push(*row);
        for h in &info.handlers {
            for ty in &h.exception_types {
                if !t.throws.contains(ty) && !new_throws.contains(ty) {
                    new_throws.push(ty.clone());
                }
            }
        }
    }
    if !new_throws.is_empty() {
        let body_start = t.body_span.start_byte;
        if t.throws.is_empty() {
            edits.push(SourceEdit {
                span: SourceSpan {
                    start_line: t.body_span.start_line,
                    start_col: t.body_span.start_col,
                    end_line: t.body_span.start_line,
                    end_col: t.body_span.start_col,
                    start_byte: body_start,
                    end_byte: body_start,
                },
                original: String::new(),
                replacement: format!("throws {} ", new_throws.join(", ")),
                requires_import: None,
            });
        } else {
            // append after the last declared throws type in the header
            let header = &content[t.span.start_byte..body_start];
            let last = t.throws.last().unwrap();
            if let Some(pos) = header.rfind(last.as_str()) {
                let at = t.span.start_byte + pos + last.len();
                edits.push(SourceEdit {
                    span: SourceSpan {
                        start_line: t.span.start_line,
                        start_col: 1,
                        end_line: t.span.start_line,
                        end_col: 1,
                        start_byte: at,
                        end_byte: at,
                    },
                    original: String::new(),
                    replacement: format!(", {}", new_throws.join(", ")),
                    requires_import: None,
                });
            }
        }
    }
    edits.sort_by_key(|e| e.span.start_byte);
    RefactoringPlan {
        kind: RefactoringKind::RemoveCatchAddThrows,
        target: issue.test_id.clone(),
        rows,
        edits,
        automatable: true,
        behavior: BehaviorNote::Strengthening,
        suggestion: "remove the suppressing catch, keep the try body, and declare the \
                     exception on the test signature so failures surface"
            .to_string(),
    }
}

fn upper_snake_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_ascii_uppercase() || c == '_' || (c.is_ascii_digit() && !cur.is_empty()) {
            cur.push(c);
        } else {
            if cur.len() >= 2 && cur.contains(|ch: char| ch.is_ascii_uppercase()) {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    if cur.len() >= 2 {
        out.push(cur);
    }
    out.retain(|t| t.len() >= 2 && t.chars().next().map_or(false, |c| c.is_ascii_uppercase()));
    out
}

fn normalize_literals(text: &str) -> String {
    let mut out = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                out.push('□');
                for d in chars.by_ref() {
                    if d == '"' {
                        break;
                    }
                }
            }
            _ if c.is_ascii_digit() => {
                out.push('□');
                while chars.peek().map_or(false, |d| d.is_ascii_digit()) {
                    chars.next();
                }
            }
            _ if c.is_ascii_uppercase() => {
                // swallow UPPER_SNAKE constants
                let mut token = c.to_string();
                while chars
                    .peek()
                    .map_or(false, |d| d.is_ascii_uppercase() || *d == '_' || d.is_ascii_digit())
                {
                    token.push(chars.next().unwrap());
                }
                if token.len() >= 2 && token.chars().all(|d| d.is_ascii_uppercase() || d == '_' || d.is_ascii_digit()) {
                    out.push('□');
                } else {
                    out.push_str(&token);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

struct BlockDraft {
    suffix: String,
    lines: Vec<String>,
}

/// Draft one classic test method per AAA block (review-required).
pub fn draft_split_multiple_aaa(
    cls: &Classification,
    ts: &TaggedSheet,
    t: &TestCaseModel,
) -> Option<RefactoringPlan> {
    if cls.blocks < 2 {
        return None;
    }
    let bounds = block_boundaries(&cls.encoding.symbols);
    let mut block_rows: Vec<Vec<usize>> = Vec::new();
    for (i, start) in bounds.iter().enumerate() {
        let end = bounds.get(i + 1).copied().unwrap_or(cls.encoding.symbols.len());
        block_rows.push(cls.encoding.rows[*start..end].to_vec());
    }

    // distinguishing constants per block: UPPER_SNAKE tokens not shared by all
    let token_sets: Vec<Vec<String>> = block_rows
        .iter()
        .map(|rows| {
            rows.iter()
                .flat_map(|r| upper_snake_tokens(&ts.sheet.rows[*r].statement.text))
                .collect()
        })
        .collect();
    let distinguishing: Vec<Vec<&String>> = token_sets
        .iter()
        .map(|set| {
            set.iter()
                .filter(|tok| !token_sets.iter().all(|other| other.contains(tok)))
                .collect()
        })
        .collect();

    // shared prefix: leading arrange rows of block 1 without distinguishing tokens
    let mut shared: Vec<usize> = Vec::new();
    for (sym, row) in cls.encoding.symbols.iter().zip(&cls.encoding.rows) {
        if *sym != Symbol::Arrange {
            break;
        }
        let text = &ts.sheet.rows[*row].statement.text;
        if upper_snake_tokens(text)
            .iter()
            .any(|tok| distinguishing[0].contains(&tok))
        {
            break;
        }
        shared.push(*row);
    }

    let mut suffixes: Vec<String> = distinguishing
        .iter()
        .map(|d| {
            d.first()
                .map(|tok| tok.split('_').next().unwrap_or(tok).to_string())
                .unwrap_or_default()
        })
        .collect();
    let unique = !suffixes.iter().any(|s| s.is_empty())
        && suffixes
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len()
            == suffixes.len();
    if !unique {
        suffixes = (1..=block_rows.len()).map(|i| i.to_string()).collect();
    }

    // declared types seen anywhere, for promoting later-block assignments
    let mut declared: std::collections::BTreeMap<&str, &str> = std::collections::BTreeMap::new();
    for row in &ts.sheet.rows {
        if let (Some(name), Some(ty)) = (&row.statement.defines, &row.statement.declared_type) {
            declared.insert(name, ty);
        }
    }

    let mut drafts = Vec::new();
    for (rows, suffix) in block_rows.iter().zip(&suffixes) {
        let mut lines = Vec::new();
        for row in shared.iter().chain(rows.iter()) {
            if rows != &block_rows[0] && !rows.contains(row) && !shared.contains(row) {
                continue;
            }
            let stmt = &ts.sheet.rows[*row].statement;
            let mut text = stmt.text.clone();
            if stmt.kind == StatementKind::Assignment {
                if let Some(var) = &stmt.defines {
                    if let Some(ty) = declared.get(var.as_str()) {
                        text = format!("{ty} {text}");
                    }
                }
            }
            if !lines.contains(&text) || !shared.contains(row) {
                lines.push(text);
            }
        }
        drafts.push(BlockDraft {
            suffix: suffix.clone(),
            lines,
        });
    }
    // drop duplicated shared rows from non-first blocks already covered above
    for draft in drafts.iter_mut().skip(1) {
        draft.lines.dedup();
    }

    let normalized: Vec<Vec<String>> = drafts
        .iter()
        .map(|d| d.lines.iter().map(|l| normalize_literals(l)).collect())
        .collect();
    let literal_only = normalized.windows(2).all(|w| w[0] == w[1]);

    let mut replacement = String::new();
    for (i, draft) in drafts.iter().enumerate() {
        if i > 0 {
            replacement.push_str("\n\n");
        }
        replacement.push_str(&format!(
            "@Test\npublic void {}_{}(){{\n",
            t.name, draft.suffix
        ));
        for line in &draft.lines {
            replacement.push_str(&format!("    {line}\n"));
        }
        replacement.push('}');
    }

    let mut suggestion = "split each AAA block into its own test case so every test \
                          fails for exactly one reason"
        .to_string();
    if literal_only {
        suggestion.push_str(
            "; the blocks differ only in literals — a parameterized test would avoid \
             the duplication",
        );
    }
    Some(RefactoringPlan {
        kind: RefactoringKind::SplitIntoPerBlockTests,
        target: TestId {
            file: ts.sheet.file.clone(),
            class: ts.sheet.class_name.clone(),
            test: ts.sheet.test_name.clone(),
        },
        rows: cls.encoding.rows.clone(),
        edits: vec![SourceEdit {
            span: t.span,
            original: String::new(),
            replacement,
            requires_import: None,
        }],
        automatable: false,
        behavior: BehaviorNote::Preserving,
        suggestion,
    })
}

fn capitalize(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Draft one test per distinct act callee (review-required); earlier acts
/// demote to arrange in later drafts.
pub fn draft_split_per_act(
    issue: &Issue,
    ts: &TaggedSheet,
    t: &TestCaseModel,
) -> Option<RefactoringPlan> {
    if issue.kind != IssueKind::MultipleActs {
        return None;
    }
    let act_rows: Vec<usize> = issue.evidence_rows.iter().map(|(r, _)| *r).collect();
    // distinct act callee names in first-appearance order
    let mut act_names: Vec<String> = Vec::new();
    for row in &act_rows {
        if let Some(c) = ts.sheet.rows[*row].statement.callee.as_ref() {
            if !act_names.contains(&c.name) {
                act_names.push(c.name.clone());
            }
        }
    }
    if act_names.len() < 2 {
        return None;
    }

    let body_rows: Vec<usize> = (0..ts.sheet.rows.len())
        .filter(|i| ts.sheet.rows[*i].section == crate::tag_sheet::Section::Body)
        .collect();

    let mut replacement = String::new();
    for (k, act_name) in act_names.iter().enumerate() {
        let last_act_row = *act_rows
            .iter()
            .filter(|r| {
                ts.sheet.rows[**r]
                    .statement
                    .callee
                    .as_ref()
                    .map_or(false, |c| &c.name == act_name)
            })
            .last()
            .unwrap();
        if k > 0 {
            replacement.push_str("\n\n");
        }
        replacement.push_str(&format!("@Test\npublic void test{}(){{\n", capitalize(act_name)));
        let mut emitted_assert = false;
        for i in &body_rows {
            let row = &ts.sheet.rows[*i];
            let tag = &ts.tags[*i];
            match tag.value {
                TagValue::Act | TagValue::Arrange | TagValue::Unknown => {
                    if *i <= last_act_row {
                        replacement.push_str(&format!("    {}\n", row.statement.text));
                    }
                }
                TagValue::Assert => {
                    // the assert belongs to the draft whose act feeds it
                    let feeds = row.statement.refs.iter().any(|id| {
                        act_rows.iter().any(|r| {
                            *r <= last_act_row
                                && ts.sheet.rows[*r]
                                    .statement
                                    .callee
                                    .as_ref()
                                    .map_or(false, |c| &c.name == act_name)
                                && ts.sheet.rows[*r].statement.defines.as_deref() == Some(id)
                        })
                    });
                    if feeds {
                        replacement.push_str(&format!("    {}\n", row.statement.text));
                        emitted_assert = true;
                    }
                }
                TagValue::Teardown => {}
            }
        }
        if !emitted_assert {
            replacement.push_str(&format!(
                "    // REVIEW: add an assert for the result of {act_name}\n"
            ));
        }
        replacement.push('}');
    }

    Some(RefactoringPlan {
        kind: RefactoringKind::SplitPerAct,
        target: issue.test_id.clone(),
        rows: act_rows,
        edits: vec![SourceEdit {
            span: t.span,
            original: String::new(),
            replacement,
            requires_import: None,
        }],
        automatable: false,
        behavior: BehaviorNote::Preserving,
        suggestion: "split the test so each acted function gets its own test and its \
                     own assert"
            .to_string(),
    })
}

fn insert_imports(content: &str, imports: &[String]) -> String {
    let mut missing: Vec<&String> = imports
        .iter()
        .filter(|imp| !content.contains(&format!("import {imp};")))
        .collect();
    missing.sort();
    missing.dedup();
    if missing.is_empty() {
        return content.to_string();
    }
    let block: String = missing
        .iter()
        .map(|imp| format!("import {imp};\n"))
        .collect();
    // after the last import, else after the package line, else at the top
    let mut insert_at = 0usize;
    let mut offset = 0usize;
    for line in content.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with("import ") || trimmed.starts_with("package ") {
            insert_at = offset + line.len();
        }
        offset += line.len();
    }
    let mut out = String::with_capacity(content.len() + block.len());
    out.push_str(&content[..insert_at]);
    out.push_str(&block);
    out.push_str(&content[insert_at..]);
    out
}

/// Apply the plan's edits atomically: stale spans and overlaps are rejected
/// before any change, and output that fails to re-parse is rolled back.
pub fn apply(plan: &RefactoringPlan, content: &str) -> Result<String, AnalysisError> {
    if plan.edits.is_empty() {
        return Err(AnalysisError::Config(format!(
            "plan {} carries no edits (suggestion-only)",
            plan.kind
        )));
    }
    let mut edits: Vec<&SourceEdit> = plan.edits.iter().collect();
    edits.sort_by_key(|e| e.span.start_byte);
    for pair in edits.windows(2) {
        if pair[1].span.start_byte < pair[0].span.end_byte {
            return Err(AnalysisError::OverlappingEdits);
        }
    }
    for edit in &edits {
        let span = &edit.span;
        if span.end_byte > content.len()
            || &content[span.start_byte..span.end_byte] != edit.original
        {
            return Err(AnalysisError::StaleEdit {
                path: plan.target.file.clone(),
                line: span.start_line,
            });
        }
    }
    let mut out = content.to_string();
    for edit in edits.iter().rev() {
        out.replace_range(edit.span.start_byte..edit.span.end_byte, &edit.replacement);
    }
    let imports: Vec<String> = plan
        .edits
        .iter()
        .filter_map(|e| e.requires_import.clone())
        .collect();
    out = insert_imports(&out, &imports);

    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar");
    let ok = parser
        .parse(&out, None)
        .map_or(false, |tree| !tree.root_node().has_error());
    if !ok {
        return Err(AnalysisError::Rollback(format!(
            "{} on {}",
            plan.kind,
            plan.target.file.display()
        )));
    }
    Ok(out)
}

/// Write a file atomically (temp file + rename in the same directory).
pub fn write_atomic(path: &Path, content: &str) -> Result<(), AnalysisError> {
    let io_err = |e: std::io::Error| AnalysisError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, content).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify;
    use crate::config::RuleConfig;
    use crate::detector::detect_all;
    use crate::source_model::parse_file;
    use crate::tag_sheet::{attach_lifecycle, expand};
    use crate::tagger::tag_sheet;
    use std::collections::BTreeSet;
    use std::path::{Path, PathBuf};

    fn cfg() -> RuleConfig {
        RuleConfig::default()
    }

    struct Analyzed {
        t: TestCaseModel,
        class: TestClassModel,
        ts: TaggedSheet,
        cls: Classification,
        issues: Vec<Issue>,
    }

    fn analyze(src: &str, test: &str) -> Analyzed {
        let class = parse_file(Path::new("T.java"), src, &cfg())
            .unwrap()
            .remove(0);
        let t = class
            .test_methods
            .iter()
            .find(|t| t.name == test)
            .unwrap()
            .clone();
        let sheet = expand(&t, &class, Path::new("T.java"), 8);
        let sheet = attach_lifecycle(sheet, &class);
        let ts = tag_sheet(sheet, &cfg());
        let cls = classify(&t, &class, &ts, &BTreeSet::new(), &cfg());
        let issues = detect_all(&t, &ts, &cls, &cfg());
        Analyzed {
            t,
            class,
            ts,
            cls,
            issues,
        }
    }

    fn issue_of(a: &Analyzed, kind: IssueKind) -> Issue {
        a.issues
            .iter()
            .find(|i| i.kind == kind)
            .unwrap_or_else(|| panic!("no {kind} issue"))
            .clone()
    }

    fn squish(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    const POLL: &str = r#"import org.junit.Test;

public class PollTest {
    @Test
    public void testPoll(){
       Snapshot s = sqlMng.createSnapshot();
       assertNotNull(s);
       String v = s.poll();
       assertEquals("8/22/2022",v);}
}
"#;

    #[test]
    fn assert_precondition_becomes_assume() {
        let a = analyze(POLL, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        assert!(plan.automatable);
        assert_eq!(plan.behavior, BehaviorNote::Strengthening);
        let out = apply(&plan, POLL).unwrap();
        assert!(out.contains("assumeNotNull(s);"));
        assert!(!out.contains("assertNotNull"));
        assert!(out.contains("import static org.junit.Assume.assumeNotNull;"));
        // fixpoint: the issue is gone on re-analysis
        let b = analyze(&out, "testPoll");
        assert!(b.issues.iter().all(|i| i.kind != IssueKind::AssertPrecondition));
        assert_eq!(b.cls.verdict, crate::classifier::Verdict::ClassicAAA);
    }

    #[test]
    fn adjacent_print_is_removed_with_the_precondition() {
        let src = r#"import org.junit.Test;

public class RegistryTest {
    @Test
    public void testSubscription(){
        String path = buildPath();
        List pList = zkClient.getChildren(path);
        assertTrue(!pList.isEmpty());
        System.out.println(pList.size());
        multipleRegistry.subscribe(path, listener);
        assertEquals(1, listener.count());}
}
"#;
        let a = analyze(src, "testSubscription");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        let out = apply(&plan, src).unwrap();
        assert!(out.contains("assumeTrue(!pList.isEmpty());"));
        assert!(!out.contains("println"));
    }

    #[test]
    fn unmapped_assert_form_downgrades_to_suggestion() {
        let src = r#"import org.junit.Test;

public class MatcherTest {
    @Test
    public void testMatch(){
        Result r = svc.prepare();
        assertThat(r, notNullValue());
        String v = svc.match(r);
        assertEquals("x", v);}
}
"#;
        let a = analyze(src, "testMatch");
        // assertThat(r, ...) references only arrange output: precondition
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        assert!(!plan.automatable);
        assert!(plan.edits.is_empty());
        assert!(plan.suggestion.contains("assertThat"));
    }

    const SET_EXCEPTION: &str = r#"import org.junit.Test;

public class AppTest {
    @Test
    public void testSetException(){
        Throwable thr = buildXExp();
        if (thr == null) {return;}
        App app = new App().setExp(thr);
        assertEquals(0, app.getMsg());}
    private Throwable buildXExp(){
        return factory.makeThrowable();
    }
}
"#;

    #[test]
    fn if_return_null_check_becomes_assume_not_null() {
        let a = analyze(SET_EXCEPTION, "testSetException");
        let issue = issue_of(&a, IssueKind::ArrangeAndQuit);
        let plan = plan_if_return_to_assume(&issue, &a.ts, &a.class);
        assert!(plan.automatable);
        let out = apply(&plan, SET_EXCEPTION).unwrap();
        assert!(out.contains("assumeNotNull(thr);"));
        assert!(!out.contains("return;}"));
        let b = analyze(&out, "testSetException");
        assert!(b.issues.iter().all(|i| i.kind != IssueKind::ArrangeAndQuit));
    }

    #[test]
    fn general_guard_becomes_assume_false() {
        let src = r#"import org.junit.Test;

public class OsTest {
    @Test
    public void testRun(){
        Env env = new Env();
        if (isWindows()) return;
        env.run();
        assertTrue(env.ok());}
    private boolean isWindows(){
        return flag.check();
    }
}
"#;
        let a = analyze(src, "testRun");
        let issue = issue_of(&a, IssueKind::ArrangeAndQuit);
        let plan = plan_if_return_to_assume(&issue, &a.ts, &a.class);
        assert_eq!(plan.edits.len(), 1);
        let out = apply(&plan, src).unwrap();
        assert!(out.contains("assumeFalse(isWindows());"));
    }

    #[test]
    fn value_return_guard_is_suggestion_only() {
        let a = analyze(SET_EXCEPTION, "testSetException");
        let mut issue = issue_of(&a, IssueKind::ArrangeAndQuit);
        // point the issue at a synthetic value-returning guard
        let row = issue.evidence_rows[0].0;
        let mut ts = a.ts.clone();
        ts.sheet.rows[row].statement.children[0].returns_value = true;
        issue.evidence_rows = vec![(row, ts.sheet.rows[row].statement.line)];
        let plan = plan_if_return_to_assume(&issue, &ts, &a.class);
        assert!(!plan.automatable);
        assert!(plan.edits.is_empty());
    }

    const HTTPCLIENT: &str = r#"import org.junit.Test;

public class HttpTest {
    @Test
    public void testHttpclient() {
        HttpClient client = new HttpClient();
        try { client.execute(); }
        catch (final ClientException e) {
            e.printStackTrace();}
        assertTrue(client.isDone());}
}
"#;

    #[test]
    fn suppressing_catch_is_removed_and_throws_added() {
        let a = analyze(HTTPCLIENT, "testHttpclient");
        let issue = issue_of(&a, IssueKind::SuppressedException);
        let plan = plan_remove_catch(&issue, &a.ts, &a.t, HTTPCLIENT);
        assert!(plan.automatable);
        let out = apply(&plan, HTTPCLIENT).unwrap();
        assert!(out.contains("throws ClientException"));
        assert!(out.contains("client.execute();"));
        assert!(!out.contains("catch"));
        let b = analyze(&out, "testHttpclient");
        assert!(b
            .issues
            .iter()
            .all(|i| i.kind != IssueKind::SuppressedException));
    }

    #[test]
    fn existing_throws_clause_is_extended() {
        let src = HTTPCLIENT.replace(
            "public void testHttpclient() {",
            "public void testHttpclient() throws java.io.IOException {",
        );
        let a = analyze(&src, "testHttpclient");
        let issue = issue_of(&a, IssueKind::SuppressedException);
        let plan = plan_remove_catch(&issue, &a.ts, &a.t, &src);
        let out = apply(&plan, &src).unwrap();
        assert!(squish(&out).contains("throws java.io.IOException, ClientException"));
    }

    #[test]
    fn finally_block_is_preserved() {
        let src = r#"import org.junit.Test;

public class HttpTest {
    @Test
    public void testHttpclient() {
        HttpClient client = new HttpClient();
        try { client.execute(); }
        catch (ClientException e) { e.printStackTrace(); }
        finally { client.close(); }
        assertTrue(client.isDone());}
}
"#;
        let a = analyze(src, "testHttpclient");
        let issue = issue_of(&a, IssueKind::SuppressedException);
        let plan = plan_remove_catch(&issue, &a.ts, &a.t, src);
        let out = apply(&plan, src).unwrap();
        assert!(!out.contains("catch"));
        assert!(squish(&out).contains("finally { client.close(); }"));
        assert!(out.contains("try"));
    }

    #[test]
    fn try_with_resources_header_is_kept() {
        let src = r#"import org.junit.Test;

public class HttpTest {
    @Test
    public void testHttpclient() {
        Request req = new Request();
        try (Client client = new Client()) { client.execute(req); }
        catch (ClientException e) { e.printStackTrace(); }
        assertTrue(req.isDone());}
}
"#;
        let a = analyze(src, "testHttpclient");
        let issue = issue_of(&a, IssueKind::SuppressedException);
        let plan = plan_remove_catch(&issue, &a.ts, &a.t, src);
        let out = apply(&plan, src).unwrap();
        assert!(out.contains("try (Client client = new Client())"));
        assert!(!out.contains("catch"));
    }

    #[test]
    fn state_capturing_catch_is_suggestion_only() {
        let src = r#"import org.junit.Test;

public class HttpTest {
    private Exception err;
    @Test
    public void testHttpclient() {
        HttpClient client = new HttpClient();
        try { client.execute(); }
        catch (ClientException e) { err = e; }
        assertTrue(err.isLogged());}
}
"#;
        let a = analyze(src, "testHttpclient");
        let issue = issue_of(&a, IssueKind::SuppressedException);
        let plan = plan_remove_catch(&issue, &a.ts, &a.t, src);
        assert!(!plan.automatable);
        assert!(plan.edits.is_empty());
    }

    const TWO_SCENARIO: &str = r#"import org.junit.Test;

public class ConfigTest {
    @Test
    public void testGetByPrefix(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);
        tc.set(SCAN_PREFIX);
        p = tc.getAllProperties();
        assertEquals("scan", p);}
}
"#;

    #[test]
    fn multiple_aaa_split_drafts_two_classic_tests() {
        let a = analyze(TWO_SCENARIO, "testGetByPrefix");
        let plan = draft_split_multiple_aaa(&a.cls, &a.ts, &a.t).unwrap();
        assert!(!plan.automatable);
        assert_eq!(plan.behavior, BehaviorNote::Preserving);
        let draft = &plan.edits[0].replacement;
        assert!(draft.contains("testGetByPrefix_PROP"));
        assert!(draft.contains("testGetByPrefix_SCAN"));
        // both drafted methods must classify classic on re-analysis
        let wrapped = format!("public class ConfigTest {{\n{draft}\n}}\n");
        let class = parse_file(Path::new("D.java"), &wrapped, &cfg())
            .unwrap()
            .remove(0);
        assert_eq!(class.test_methods.len(), 2);
        for t in &class.test_methods {
            let sheet = expand(t, &class, Path::new("D.java"), 8);
            let ts = tag_sheet(sheet, &cfg());
            let cls = classify(t, &class, &ts, &BTreeSet::new(), &cfg());
            assert_eq!(
                cls.verdict,
                crate::classifier::Verdict::ClassicAAA,
                "{} -> {}",
                t.name,
                cls.encoding.layout_string()
            );
        }
        // shared arrange duplicated, assignment promoted to declaration
        assert_eq!(draft.matches("Config con = new Config();").count(), 2);
        assert_eq!(draft.matches("var p = tc.getAllProperties();").count(), 2);
        // blocks differ only in literals: parameterized-test note expected
        assert!(plan.suggestion.contains("parameterized"));
    }

    #[test]
    fn single_block_case_has_no_split_draft() {
        let src = r#"import org.junit.Test;

public class ConfigTest {
    @Test
    public void testGetByPrefix_Drop(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);}
}
"#;
        let a = analyze(src, "testGetByPrefix_Drop");
        assert!(draft_split_multiple_aaa(&a.cls, &a.ts, &a.t).is_none());
    }

    #[test]
    fn per_act_split_demotes_earlier_acts() {
        let src = r#"import org.junit.Test;

public class QemuTest {
    @Test
    public void testCreateAndInfo(){
        QemuImg qemu = new QemuImg();
        QemuImgFile file = new QemuImgFile("disk");
        qemu.create(file);
        Map info = qemu.info(file);
        assertEquals(SIZE, info.size());}
}
"#;
        let a = analyze(src, "testCreateAndInfo");
        let issue = issue_of(&a, IssueKind::MultipleActs);
        let plan = draft_split_per_act(&issue, &a.ts, &a.t).unwrap();
        let draft = &plan.edits[0].replacement;
        assert!(draft.contains("public void testCreate()"));
        assert!(draft.contains("public void testInfo()"));
        // testInfo keeps create as arrange and gets the assert
        let info_part = &draft[draft.find("testInfo").unwrap()..];
        assert!(info_part.contains("qemu.create(file);"));
        assert!(info_part.contains("assertEquals(SIZE, info.size());"));
        // testCreate has no assignable assert: review marker
        let create_part =
            &draft[draft.find("testCreate").unwrap()..draft.find("testInfo").unwrap()];
        assert!(create_part.contains("REVIEW"));
    }

    #[test]
    fn applying_a_plan_twice_is_stale() {
        let a = analyze(POLL, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        let once = apply(&plan, POLL).unwrap();
        match apply(&plan, &once) {
            Err(AnalysisError::StaleEdit { .. }) => {}
            other => panic!("expected StaleEdit, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_edits_are_rejected() {
        let a = analyze(POLL, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let mut plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        let mut dup = plan.edits[0].clone();
        dup.span.start_byte += 1;
        dup.span.end_byte += 1;
        plan.edits.push(dup);
        match apply(&plan, POLL) {
            Err(AnalysisError::OverlappingEdits) => {}
            other => panic!("expected OverlappingEdits, got {other:?}"),
        }
    }

    #[test]
    fn broken_replacement_rolls_back() {
        let a = analyze(POLL, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let mut plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        plan.edits[0].replacement = "}{ not java ((".to_string();
        match apply(&plan, POLL) {
            Err(AnalysisError::Rollback(_)) => {}
            other => panic!("expected Rollback, got {other:?}"),
        }
    }

    #[test]
    fn import_insertion_is_idempotent() {
        let with_import = POLL.replace(
            "import org.junit.Test;",
            "import org.junit.Test;\nimport static org.junit.Assume.assumeNotNull;",
        );
        let a = analyze(&with_import, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        let out = apply(&plan, &with_import).unwrap();
        assert_eq!(
            out.matches("import static org.junit.Assume.assumeNotNull;")
                .count(),
            1
        );
    }

    #[test]
    fn junit5_imports_switch_the_assumption_api() {
        let src = POLL.replace("import org.junit.Test;", "import org.junit.jupiter.api.Test;");
        let a = analyze(&src, "testPoll");
        let issue = issue_of(&a, IssueKind::AssertPrecondition);
        let plan = plan_assert_to_assume(&issue, &a.ts, &a.class);
        let out = apply(&plan, &src).unwrap();
        assert!(out.contains("assumeTrue(s != null);"));
        assert!(out.contains("import static org.junit.jupiter.api.Assumptions.assumeTrue;"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path: PathBuf = dir.path().join("A.java");
        std::fs::write(&path, "old").unwrap();
        write_atomic(&path, "new").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
