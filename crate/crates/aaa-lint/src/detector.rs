//! Detection of the three Anti-AAA patterns and the four in-block design
//! flaws, plus per-test size/complexity metrics.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::classifier::{block_boundaries, Classification, LayoutEncoding};
use crate::config::RuleConfig;
use crate::source_model::{Statement, StatementKind, TestCaseModel};
use crate::tag_sheet::Section;
use crate::tagger::{TagValue, TaggedSheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum IssueKind {
    MultipleAAA,
    MissingAssert,
    AssertPrecondition,
    ObscureAssert,
    ArrangeAndQuit,
    MultipleActs,
    SuppressedException,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IssueKind::MultipleAAA => "MultipleAAA",
            IssueKind::MissingAssert => "MissingAssert",
            IssueKind::AssertPrecondition => "AssertPrecondition",
            IssueKind::ObscureAssert => "ObscureAssert",
            IssueKind::ArrangeAndQuit => "ArrangeAndQuit",
            IssueKind::MultipleActs => "MultipleActs",
            IssueKind::SuppressedException => "SuppressedException",
        };
        f.write_str(s)
    }
}

impl IssueKind {
    pub fn slug(self) -> &'static str {
        match self {
            IssueKind::MultipleAAA => "multiple-aaa",
            IssueKind::MissingAssert => "missing-assert",
            IssueKind::AssertPrecondition => "assert-precondition",
            IssueKind::ObscureAssert => "obscure-assert",
            IssueKind::ArrangeAndQuit => "arrange-and-quit",
            IssueKind::MultipleActs => "multiple-acts",
            IssueKind::SuppressedException => "suppressed-exception",
        }
    }

    pub fn from_slug(s: &str) -> Option<IssueKind> {
        ALL_ISSUE_KINDS.iter().copied().find(|k| k.slug() == s)
    }

    pub fn automatable(self) -> bool {
        matches!(
            self,
            IssueKind::AssertPrecondition
                | IssueKind::ArrangeAndQuit
                | IssueKind::SuppressedException
        )
    }

    pub fn suggestion(self) -> RefactoringKind {
        match self {
            IssueKind::MultipleAAA => RefactoringKind::SplitIntoPerBlockTests,
            IssueKind::MissingAssert => RefactoringKind::AddAssertFromExpectedResource,
            IssueKind::AssertPrecondition => RefactoringKind::ReplaceAssertWithAssume,
            IssueKind::ObscureAssert => RefactoringKind::SimplifyAssertLogic,
            IssueKind::ArrangeAndQuit => RefactoringKind::ReplaceIfReturnWithAssume,
            IssueKind::MultipleActs => RefactoringKind::SplitPerAct,
            IssueKind::SuppressedException => RefactoringKind::RemoveCatchAddThrows,
        }
    }

    /// Drawback summary shown in reports.
    pub fn drawback(self) -> &'static str {
        match self {
            IssueKind::MultipleAAA => {
                "more than one AAA block: the test can fail for more than one reason \
                 and grows hard to comprehend and maintain"
            }
            IssueKind::MissingAssert => {
                "no assertion and no declared expectation: the test never fails, \
                 delegating result inspection to manual effort"
            }
            IssueKind::AssertPrecondition => {
                "asserting a precondition of arranged objects adds a second failure \
                 reason and can skip the act entirely"
            }
            IssueKind::ObscureAssert => {
                "control flow inside the assert block obscures what is asserted"
            }
            IssueKind::ArrangeAndQuit => {
                "silent return on an unmet arrange condition hides whether the test \
                 actually ran"
            }
            IssueKind::MultipleActs => {
                "acting more than one function makes failures ambiguous and leaves \
                 intermediate outputs under-asserted"
            }
            IssueKind::SuppressedException => {
                "the try-catch swallows an exception that should fail the test, \
                 hiding errors from developers"
            }
        }
    }
}

pub const ALL_ISSUE_KINDS: [IssueKind; 7] = [
    IssueKind::MultipleAAA,
    IssueKind::MissingAssert,
    IssueKind::AssertPrecondition,
    IssueKind::ObscureAssert,
    IssueKind::ArrangeAndQuit,
    IssueKind::MultipleActs,
    IssueKind::SuppressedException,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RefactoringKind {
    ReplaceAssertWithAssume,
    ReplaceIfReturnWithAssume,
    RemoveCatchAddThrows,
    SplitIntoPerBlockTests,
    SplitPerAct,
    AddAssertFromExpectedResource,
    SimplifyAssertLogic,
}

impl fmt::Display for RefactoringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RefactoringKind::ReplaceAssertWithAssume => "ReplaceAssertWithAssume",
            RefactoringKind::ReplaceIfReturnWithAssume => "ReplaceIfReturnWithAssume",
            RefactoringKind::RemoveCatchAddThrows => "RemoveCatchAddThrows",
            RefactoringKind::SplitIntoPerBlockTests => "SplitIntoPerBlockTests",
            RefactoringKind::SplitPerAct => "SplitPerAct",
            RefactoringKind::AddAssertFromExpectedResource => "AddAssertFromExpectedResource",
            RefactoringKind::SimplifyAssertLogic => "SimplifyAssertLogic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestId {
    pub file: PathBuf,
    pub class: String,
    pub test: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub test_id: TestId,
    /// (sheet row index, source line) pairs.
    pub evidence_rows: Vec<(usize, usize)>,
    pub message: String,
    pub automatable: bool,
    pub suggestion: RefactoringKind,
}

fn test_id(ts: &TaggedSheet) -> TestId {
    TestId {
        file: ts.sheet.file.clone(),
        class: ts.sheet.class_name.clone(),
        test: ts.sheet.test_name.clone(),
    }
}

fn issue(ts: &TaggedSheet, kind: IssueKind, evidence_rows: Vec<(usize, usize)>) -> Issue {
    Issue {
        kind,
        test_id: test_id(ts),
        message: kind.drawback().to_string(),
        automatable: kind.automatable(),
        suggestion: kind.suggestion(),
        evidence_rows,
    }
}

fn row_line(ts: &TaggedSheet, row: usize) -> usize {
    ts.sheet.rows[row].statement.line
}

pub fn detect_multiple_aaa(cls: &Classification, ts: &TaggedSheet) -> Option<Issue> {
    if cls.blocks < 2 {
        return None;
    }
    let evidence: Vec<(usize, usize)> = block_boundaries(&cls.encoding.symbols)
        .into_iter()
        .map(|sym_idx| {
            let row = cls.encoding.rows[sym_idx];
            (row, row_line(ts, row))
        })
        .collect();
    Some(issue(ts, IssueKind::MultipleAAA, evidence))
}

pub fn detect_missing_assert(
    ts: &TaggedSheet,
    t: &TestCaseModel,
    cfg: &RuleConfig,
) -> Option<Issue> {
    if cfg.accept_implicit_no_throw {
        return None;
    }
    let any_assert = ts.tags.iter().any(|tag| tag.value == TagValue::Assert);
    if any_assert || t.expected_exception().is_some() {
        return None;
    }
    let uses_throws_check = ts.sheet.rows.iter().any(|r| {
        r.statement
            .body_callees()
            .iter()
            .any(|c| c.name == "assertThrows")
    });
    if uses_throws_check {
        return None;
    }
    let mut evidence: Vec<(usize, usize)> = ts
        .sheet
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            r.statement
                .body_callees()
                .iter()
                .any(|c| cfg.is_print_call(c))
        })
        .map(|(i, r)| (i, r.statement.line))
        .collect();
    if evidence.is_empty() {
        evidence = match ts.sheet.rows.last() {
            Some(last) => vec![(ts.sheet.rows.len() - 1, last.statement.line)],
            None => vec![(0, t.span.start_line)],
        };
    }
    Some(issue(ts, IssueKind::MissingAssert, evidence))
}

pub fn detect_assert_precondition(ts: &TaggedSheet, e: &LayoutEncoding) -> Option<Issue> {
    if e.precondition_remap.is_empty() {
        return None;
    }
    let act_defined: Vec<&String> = ts
        .sheet
        .rows
        .iter()
        .zip(&ts.tags)
        .filter(|(_, tag)| tag.value == TagValue::Act)
        .filter_map(|(r, _)| r.statement.defines.as_ref())
        .collect();
    let evidence: Vec<(usize, usize)> = e
        .precondition_remap
        .iter()
        .map(|sym_idx| e.rows[*sym_idx])
        .filter(|row| {
            ts.sheet.rows[*row]
                .statement
                .refs
                .iter()
                .all(|id| !act_defined.contains(&id))
        })
        .map(|row| (row, row_line(ts, row)))
        .collect();
    if evidence.is_empty() {
        return None;
    }
    Some(issue(ts, IssueKind::AssertPrecondition, evidence))
}

/// Loop rows whose whole body is plain assert invocations — the idiomatic
/// way to assert over a collection, tolerated under `allow_loop_assert`.
fn is_plain_loop_assert(stmt: &Statement, cfg: &RuleConfig) -> bool {
    stmt.kind == StatementKind::Loop
        && !stmt.children.is_empty()
        && stmt.children.iter().all(|c| {
            c.kind == StatementKind::Invocation
                && c.callee
                    .as_ref()
                    .map_or(false, |callee| cfg.is_assert_callee(&callee.name))
        })
}

pub fn detect_obscure_assert(ts: &TaggedSheet, cfg: &RuleConfig) -> Option<Issue> {
    let first_assert = ts
        .tags
        .iter()
        .position(|tag| tag.value == TagValue::Assert)?;
    let evidence: Vec<(usize, usize)> = ts
        .sheet
        .rows
        .iter()
        .zip(&ts.tags)
        .enumerate()
        .skip(first_assert)
        .filter(|(_, (row, tag))| {
            tag.value == TagValue::Assert
                && matches!(
                    row.statement.kind,
                    StatementKind::Loop | StatementKind::Conditional
                )
                && !(cfg.allow_loop_assert && is_plain_loop_assert(&row.statement, cfg))
        })
        .map(|(i, (row, _))| (i, row.statement.line))
        .collect();
    if evidence.is_empty() {
        return None;
    }
    Some(issue(ts, IssueKind::ObscureAssert, evidence))
}

fn is_bare_return_conditional(stmt: &Statement) -> bool {
    stmt.kind == StatementKind::Conditional
        && stmt.children.len() == 1
        && stmt.children[0].kind == StatementKind::Return
        && !stmt.children[0].returns_value
        && stmt.else_children.is_empty()
}

pub fn detect_arrange_and_quit(_t: &TestCaseModel, ts: &TaggedSheet) -> Option<Issue> {
    let first_act = ts.tags.iter().position(|tag| tag.value == TagValue::Act)?;
    let evidence: Vec<(usize, usize)> = ts
        .sheet
        .rows
        .iter()
        .enumerate()
        .take(first_act)
        .filter(|(_, row)| {
            row.section == Section::Body || row.section == Section::Prologue
        })
        .filter(|(_, row)| is_bare_return_conditional(&row.statement))
        .map(|(i, row)| (i, row.statement.line))
        .collect();
    if evidence.is_empty() {
        return None;
    }
    Some(issue(ts, IssueKind::ArrangeAndQuit, evidence))
}

fn act_callee_name(stmt: &Statement, cfg: &RuleConfig) -> Option<String> {
    stmt.body_callees()
        .iter()
        .find(|c| !cfg.is_assert_callee(&c.name) && !cfg.is_print_call(c))
        .map(|c| c.name.clone())
}

pub fn detect_multiple_acts(ts: &TaggedSheet, cfg: &RuleConfig) -> Option<Issue> {
    let acts: Vec<(usize, String)> = ts
        .sheet
        .rows
        .iter()
        .zip(&ts.tags)
        .enumerate()
        .filter(|(_, (_, tag))| tag.value == TagValue::Act)
        .filter_map(|(i, (row, _))| act_callee_name(&row.statement, cfg).map(|n| (i, n)))
        .collect();
    let mut names: Vec<&String> = acts.iter().map(|(_, n)| n).collect();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        // repeated execution of one function is legitimate
        return None;
    }
    let evidence = acts
        .iter()
        .map(|(i, _)| (*i, row_line(ts, *i)))
        .collect();
    Some(issue(ts, IssueKind::MultipleActs, evidence))
}

fn handler_suppresses(handler: &crate::source_model::CatchHandler, cfg: &RuleConfig) -> bool {
    let rethrows = handler
        .statements
        .iter()
        .any(|s| s.kind == StatementKind::Throw || s.contains_kind(StatementKind::Throw));
    let fails = handler.statements.iter().any(|s| {
        s.all_callees()
            .iter()
            .any(|c| cfg.is_assert_callee(&c.name))
    });
    !rethrows && !fails
}

pub fn detect_suppressed_exception(
    _t: &TestCaseModel,
    ts: &TaggedSheet,
    cfg: &RuleConfig,
) -> Option<Issue> {
    let evidence: Vec<(usize, usize)> = ts
        .sheet
        .rows
        .iter()
        .zip(&ts.tags)
        .enumerate()
        .filter(|(_, (row, tag))| {
            tag.value == TagValue::Act
                && row.statement.kind == StatementKind::TryBlock
                && row.statement.try_info.as_ref().map_or(false, |info| {
                    !info.handlers.is_empty()
                        && info.handlers.iter().all(|h| handler_suppresses(h, cfg))
                })
        })
        .map(|(i, (row, _))| (i, row.statement.line))
        .collect();
    if evidence.is_empty() {
        return None;
    }
    Some(issue(ts, IssueKind::SuppressedException, evidence))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TestMetrics {
    pub loc: usize,
    pub cyclomatic: usize,
    pub n_arrange: usize,
    pub n_act: usize,
    pub n_assert: usize,
}

fn structural_decisions(statements: &[Statement]) -> usize {
    let mut n = 0;
    for s in statements {
        match s.kind {
            StatementKind::Conditional => n += 1,
            StatementKind::Loop => n += 1,
            StatementKind::TryBlock => {
                if let Some(info) = &s.try_info {
                    n += info.handlers.len();
                    for h in &info.handlers {
                        n += structural_decisions(&h.statements);
                    }
                }
            }
            _ => {
                // case labels of unexpanded switches
                n += s.text.matches("case ").count();
            }
        }
        n += structural_decisions(&s.children);
        n += structural_decisions(&s.else_children);
    }
    n
}

fn short_circuit_decisions(text: &str) -> usize {
    let ternaries = text
        .char_indices()
        .filter(|(i, c)| *c == '?' && text.as_bytes().get(i.wrapping_sub(1)) != Some(&b'<'))
        .count();
    text.matches("&&").count() + text.matches("||").count() + ternaries
}

pub fn compute_metrics(t: &TestCaseModel, ts: &TaggedSheet) -> TestMetrics {
    let loc = t
        .statements
        .iter()
        .flat_map(|s| s.text.lines())
        .filter(|l| {
            let trimmed = l.trim();
            !trimmed.is_empty() && !trimmed.chars().all(|c| "{}();".contains(c))
        })
        .count();
    let cyclomatic = 1
        + structural_decisions(&t.statements)
        + t.statements
            .iter()
            .map(|s| short_circuit_decisions(&s.text))
            .sum::<usize>();
    let mut metrics = TestMetrics {
        loc,
        cyclomatic,
        n_arrange: 0,
        n_act: 0,
        n_assert: 0,
    };
    for tag in &ts.tags {
        match tag.value {
            TagValue::Arrange => metrics.n_arrange += 1,
            TagValue::Act => metrics.n_act += 1,
            TagValue::Assert => metrics.n_assert += 1,
            _ => {}
        }
    }
    metrics
}

/// All detectors in fixed order.
pub fn detect_all(
    t: &TestCaseModel,
    ts: &TaggedSheet,
    cls: &Classification,
    cfg: &RuleConfig,
) -> Vec<Issue> {
    [
        detect_multiple_aaa(cls, ts),
        detect_missing_assert(ts, t, cfg),
        detect_assert_precondition(ts, &cls.encoding),
        detect_obscure_assert(ts, cfg),
        detect_arrange_and_quit(t, ts),
        detect_multiple_acts(ts, cfg),
        detect_suppressed_exception(t, ts, cfg),
    ]
    .into_iter()
    .flatten()
    .collect()
}
