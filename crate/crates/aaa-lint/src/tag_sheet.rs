//! Flattened "tag-sheet" of a test case: invocations of test-class-defined
//! methods are expanded into their internal call traces, production-method
//! calls stay atomic.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::source_model::{
    HelperMethod, LifecycleKind, Statement, StatementKind, TestCaseModel, TestClassModel,
};
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Section {
    Prologue,
    Body,
    Epilogue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpandedStatement {
    /// Call chain from the test method down to this statement, as
    /// (method name, line) pairs. Always starts with the test method.
    pub origin: Vec<(String, usize)>,
    pub statement: Statement,
    pub depth: usize,
    pub production_call: bool,
    /// Expansion stopped here because of a cycle or the depth limit.
    pub truncated: bool,
    pub section: Section,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagSheet {
    pub class_name: String,
    pub test_name: String,
    pub file: PathBuf,
    pub rows: Vec<ExpandedStatement>,
}

impl TagSheet {
    pub fn body_rows(&self) -> impl Iterator<Item = (usize, &ExpandedStatement)> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.section == Section::Body)
    }
}

fn resolve_class_method<'a>(
    class: &'a TestClassModel,
    name: &str,
    arity: usize,
    receiver: Option<&String>,
) -> Option<&'a HelperMethod> {
    // Only bare or this-qualified calls can target the test class scope.
    if let Some(recv) = receiver {
        if recv != "this" {
            return None;
        }
    }
    class
        .resolve_helper(name, arity)
        .or_else(|| class.lifecycle_methods.iter().find(|h| h.name == name))
}

struct Expander<'a> {
    class: &'a TestClassModel,
    test_name: &'a str,
    limit: usize,
    rows: Vec<ExpandedStatement>,
}

impl<'a> Expander<'a> {
    fn statement_is_production(&self, stmt: &Statement) -> bool {
        stmt.callee.as_ref().map_or(false, |c| {
            resolve_class_method(self.class, &c.name, c.args.len(), c.receiver.as_ref()).is_none()
        })
    }

    fn push_rows(
        &mut self,
        statements: &[Statement],
        origin: &[(String, usize)],
        stack: &mut Vec<String>,
        section: Section,
    ) {
        for stmt in statements {
            let helper = if stmt.callee.as_ref().map_or(false, |c| !c.constructor) {
                let c = stmt.callee.as_ref().unwrap();
                resolve_class_method(self.class, &c.name, c.args.len(), c.receiver.as_ref())
            } else {
                None
            };
            match helper {
                Some(h) if stmt.kind == StatementKind::Invocation => {
                    if stack.contains(&h.name) || stack.len() >= self.limit {
                        let trace = own_trace(origin, stack, stmt.line, self.test_name);
                        self.rows.push(ExpandedStatement {
                            depth: trace.len() - 1,
                            origin: trace,
                            statement: stmt.clone(),
                            production_call: false,
                            truncated: true,
                            section,
                        });
                    } else {
                        let mut inner = origin.to_vec();
                        inner.push((h.name.clone(), stmt.line));
                        stack.push(h.name.clone());
                        let h_statements = h.statements.clone();
                        self.push_rows(&h_statements, &inner, stack, section);
                        stack.pop();
                    }
                }
                Some(h) => {
                    // Non-invocation statements keep their own row; the helper
                    // body is inlined right after the call site.
                    let trace = own_trace(origin, stack, stmt.line, self.test_name);
                    self.rows.push(ExpandedStatement {
                        depth: trace.len() - 1,
                        origin: trace,
                        statement: stmt.clone(),
                        production_call: false,
                        truncated: false,
                        section,
                    });
                    if !stack.contains(&h.name) && stack.len() < self.limit {
                        let mut inner = origin.to_vec();
                        inner.push((h.name.clone(), stmt.line));
                        stack.push(h.name.clone());
                        let h_statements = h.statements.clone();
                        self.push_rows(&h_statements, &inner, stack, section);
                        stack.pop();
                    }
                }
                None => {
                    let production = self.statement_is_production(stmt);
                    let trace = own_trace(origin, stack, stmt.line, self.test_name);
                    self.rows.push(ExpandedStatement {
                        depth: trace.len() - 1,
                        origin: trace,
                        statement: stmt.clone(),
                        production_call: production,
                        truncated: false,
                        section,
                    });
                }
            }
        }
    }
}

fn own_trace(
    origin: &[(String, usize)],
    stack: &[String],
    line: usize,
    test_name: &str,
) -> Vec<(String, usize)> {
    let mut trace = origin.to_vec();
    if trace.is_empty() {
        trace.push((test_name.to_string(), line));
    } else {
        let owner = stack.last().map(|s| s.as_str()).unwrap_or(test_name);
        if trace.last().map(|(n, _)| n.as_str()) == Some(owner) {
            trace.last_mut().unwrap().1 = line;
        } else {
            trace.push((owner.to_string(), line));
        }
    }
    trace
}

/// Inline every test-class-local invocation of `test` into its call trace.
pub fn expand(
    test: &TestCaseModel,
    class: &TestClassModel,
    file: &Path,
    limit: usize,
) -> TagSheet {
    let mut expander = Expander {
        class,
        test_name: &test.name,
        limit,
        rows: Vec::new(),
    };
    let mut stack = Vec::new();
    expander.push_rows(&test.statements, &[], &mut stack, Section::Body);
    // Re-anchor every trace so it starts with the test method.
    for row in &mut expander.rows {
        if row.origin.first().map(|(n, _)| n.as_str()) != Some(test.name.as_str()) {
            row.origin
                .insert(0, (test.name.clone(), row.origin[0].1));
            row.depth = row.origin.len() - 1;
        }
    }
    TagSheet {
        class_name: class.qualified_name.clone(),
        test_name: test.name.clone(),
        file: file.to_path_buf(),
        rows: expander.rows,
    }
}

/// Prepend before-all/before-each rows and append after-each/after-all rows.
pub fn attach_lifecycle(sheet: TagSheet, class: &TestClassModel) -> TagSheet {
    let mut expander = Expander {
        class,
        test_name: &sheet.test_name,
        limit: 8,
        rows: Vec::new(),
    };
    let mut prologue = Vec::new();
    for kind in [LifecycleKind::BeforeAll, LifecycleKind::BeforeEach] {
        for method in class
            .lifecycle_methods
            .iter()
            .filter(|m| m.lifecycle == Some(kind))
        {
            expander.rows.clear();
            let origin = vec![
                (sheet.test_name.clone(), method.span.start_line),
                (method.name.clone(), method.span.start_line),
            ];
            let mut stack = vec![method.name.clone()];
            let statements = method.statements.clone();
            expander.push_rows(&statements, &origin, &mut stack, Section::Prologue);
            prologue.append(&mut expander.rows);
        }
    }
    let mut epilogue = Vec::new();
    for kind in [LifecycleKind::AfterEach, LifecycleKind::AfterAll] {
        for method in class
            .lifecycle_methods
            .iter()
            .filter(|m| m.lifecycle == Some(kind))
        {
            expander.rows.clear();
            let origin = vec![
                (sheet.test_name.clone(), method.span.start_line),
                (method.name.clone(), method.span.start_line),
            ];
            let mut stack = vec![method.name.clone()];
            let statements = method.statements.clone();
            expander.push_rows(&statements, &origin, &mut stack, Section::Epilogue);
            epilogue.append(&mut expander.rows);
        }
    }
    let mut rows = prologue;
    rows.extend(sheet.rows);
    rows.extend(epilogue);
    TagSheet { rows, ..sheet }
}

/// No remaining row is an expandable test-class-local invocation.
pub fn is_fully_expanded(sheet: &TagSheet, class: &TestClassModel) -> bool {
    sheet.rows.iter().all(|row| {
        row.truncated
            || row.statement.kind != StatementKind::Invocation
            || row.statement.callee.as_ref().map_or(true, |c| {
                c.constructor
                    || resolve_class_method(class, &c.name, c.args.len(), c.receiver.as_ref())
                        .is_none()
            })
    })
}

fn origin_string(origin: &[(String, usize)]) -> String {
    origin
        .iter()
        .map(|(name, line)| format!("{name}:{line}"))
        .collect::<Vec<_>>()
        .join(">")
}

/// Export rows in the tag-sheet CSV format; `tags` fills the `tag` column.
pub fn write_sheet_csv<W: Write>(
    sheet: &TagSheet,
    tags: Option<&[String]>,
    writer: W,
    with_header: bool,
) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    if with_header {
        w.write_record([
            "file", "test_class", "test_case", "seq", "depth", "origin", "stmt_kind", "tag",
            "text",
        ])
        .map_err(csv_err)?;
    }
    for (seq, row) in sheet.rows.iter().enumerate() {
        let tag = tags.and_then(|t| t.get(seq)).cloned().unwrap_or_default();
        w.write_record([
            sheet.file.display().to_string(),
            sheet.class_name.clone(),
            sheet.test_name.clone(),
            seq.to_string(),
            row.depth.to_string(),
            origin_string(&row.origin),
            format!("{:?}", row.statement.kind),
            tag,
            row.statement.text.replace('\n', " "),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| AnalysisError::Io {
        path: PathBuf::from("<csv>"),
        source: e,
    })?;
    Ok(())
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Config(format!("csv: {e}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagCsvRow {
    pub file: String,
    pub test_class: String,
    pub test_case: String,
    pub seq: usize,
    pub tag: String,
}

/// Ingest a tag-sheet CSV (tool export or human gold tags).
pub fn read_tag_csv(path: &Path) -> Result<Vec<TagCsvRow>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| AnalysisError::Config(format!("csv {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.len() < 8 {
            continue;
        }
        out.push(TagCsvRow {
            file: record[0].to_string(),
            test_class: record[1].to_string(),
            test_case: record[2].to_string(),
            seq: record[3].parse().unwrap_or(0),
            tag: record[7].to_string(),
        });
    }
    Ok(out)
}
