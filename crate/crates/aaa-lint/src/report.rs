//! Report emission: json (full structured results), csv (the per-test
//! record schema), markdown (human summary), and SARIF 2.1.0.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classifier::Verdict;
use crate::detector::{Issue, IssueKind, ALL_ISSUE_KINDS};
use crate::stats::{write_records_csv, CorpusSummary, TestRecord};
use crate::AnalysisError;

/// One fully analyzed test case, as handed to the emitters.
#[derive(Debug, Clone)]
pub struct AnalyzedTest {
    pub record: TestRecord,
    pub layout: String,
    pub issues: Vec<Issue>,
}

impl AnalyzedTest {
    /// Anti-AAA tests must carry an anti-pattern issue or be flagged as
    /// unmatched; they are never silently dropped.
    pub fn unmatched_anti(&self) -> bool {
        self.record.verdict == Verdict::AntiAAA
            && !self.issues.iter().any(|i| {
                matches!(
                    i.kind,
                    IssueKind::MultipleAAA
                        | IssueKind::MissingAssert
                        | IssueKind::AssertPrecondition
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueDoc {
    pub kind: String,
    pub line: usize,
    pub rows: Vec<usize>,
    pub message: String,
    pub automatable: bool,
    pub suggestion: String,
    pub drawback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDoc {
    pub file: String,
    pub class: String,
    pub test: String,
    pub verdict: String,
    pub special_kind: Option<String>,
    pub blocks: usize,
    pub layout: String,
    pub loc: usize,
    pub cyclomatic: usize,
    pub n_arrange: usize,
    pub n_act: usize,
    pub n_assert: usize,
    pub unmatched_anti: bool,
    pub issues: Vec<IssueDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub metric: String,
    pub u: Option<f64>,
    pub p: Option<f64>,
    pub n_aaa: usize,
    pub n_anti: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub analyzed_unit_tests: usize,
    pub non_unit_tests: usize,
    pub classic: usize,
    pub special: usize,
    pub anti: usize,
    pub special_counts: Vec<(String, usize)>,
    pub issue_counts: Vec<(String, usize)>,
    pub proportions: Option<(f64, f64, f64)>,
    pub comparisons: Vec<ComparisonDoc>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub summary: SummaryDoc,
    pub tests: Vec<TestDoc>,
}

pub fn build_document(summary: &CorpusSummary, tests: &[AnalyzedTest]) -> ReportDocument {
    let mut tests: Vec<&AnalyzedTest> = tests.iter().collect();
    tests.sort_by(|a, b| {
        (&a.record.file, &a.record.class, &a.record.test)
            .cmp(&(&b.record.file, &b.record.class, &b.record.test))
    });
    let test_docs = tests
        .iter()
        .map(|t| {
            let r = &t.record;
            TestDoc {
                file: r.file.display().to_string(),
                class: r.class.clone(),
                test: r.test.clone(),
                verdict: r.verdict.to_string(),
                special_kind: r.special_kind.map(|k| k.to_string()),
                blocks: r.blocks,
                layout: t.layout.clone(),
                loc: r.metrics.loc,
                cyclomatic: r.metrics.cyclomatic,
                n_arrange: r.metrics.n_arrange,
                n_act: r.metrics.n_act,
                n_assert: r.metrics.n_assert,
                unmatched_anti: t.unmatched_anti(),
                issues: t
                    .issues
                    .iter()
                    .map(|i| IssueDoc {
                        kind: i.kind.slug().to_string(),
                        line: i.evidence_rows.first().map(|(_, l)| *l).unwrap_or(0),
                        rows: i.evidence_rows.iter().map(|(r, _)| *r).collect(),
                        message: i.message.clone(),
                        automatable: i.automatable,
                        suggestion: i.suggestion.to_string(),
                        drawback: i.kind.drawback().to_string(),
                    })
                    .collect(),
            }
        })
        .collect();
    ReportDocument {
        summary: SummaryDoc {
            analyzed_unit_tests: summary.analyzed_unit_tests,
            non_unit_tests: summary.non_unit_tests,
            classic: summary.classic,
            special: summary.special,
            anti: summary.anti,
            special_counts: summary
                .special_counts
                .iter()
                .map(|(k, n)| (k.to_string(), *n))
                .collect(),
            issue_counts: summary
                .issue_counts
                .iter()
                .map(|(k, n)| (k.slug().to_string(), *n))
                .collect(),
            proportions: summary.proportions,
            comparisons: summary
                .comparisons
                .iter()
                .map(|c| ComparisonDoc {
                    metric: c.metric.to_string(),
                    u: c.u,
                    p: c.p,
                    n_aaa: c.n_aaa,
                    n_anti: c.n_anti,
                })
                .collect(),
            warning: summary.warning.clone(),
        },
        tests: test_docs,
    }
}

pub fn emit_json(summary: &CorpusSummary, tests: &[AnalyzedTest]) -> String {
    let doc = build_document(summary, tests);
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}

pub fn emit_csv(tests: &[AnalyzedTest]) -> Result<String, AnalysisError> {
    let mut records: Vec<TestRecord> = tests.iter().map(|t| t.record.clone()).collect();
    records.sort_by(|a, b| (&a.file, &a.class, &a.test).cmp(&(&b.file, &b.class, &b.test)));
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

pub fn emit_markdown(summary: &CorpusSummary, tests: &[AnalyzedTest]) -> String {
    let doc = build_document(summary, tests);
    let s = &doc.summary;
    let mut out = String::new();
    out.push_str("# AAA analysis report\n\n");
    out.push_str(&format!(
        "{} unit tests analyzed ({} non-unit tests skipped): {} classic, {} special, {} anti-AAA.\n\n",
        s.analyzed_unit_tests, s.non_unit_tests, s.classic, s.special, s.anti
    ));
    if let Some(w) = &s.warning {
        out.push_str(&format!("> {w}\n\n"));
    }
    if !s.issue_counts.is_empty() {
        out.push_str("## Issues by kind\n\n");
        for (kind, n) in &s.issue_counts {
            out.push_str(&format!("- `{kind}`: {n}\n"));
        }
        out.push('\n');
    }
    if s.comparisons.iter().any(|c| c.p.is_some()) {
        out.push_str("## AAA vs Anti-AAA metric comparisons (Mann-Whitney U)\n\n");
        out.push_str("| metric | U | p | n(AAA) | n(anti) |\n|---|---|---|---|---|\n");
        for c in &s.comparisons {
            let fmt_opt = |v: Option<f64>| {
                v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "—".into())
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                c.metric,
                fmt_opt(c.u),
                fmt_opt(c.p),
                c.n_aaa,
                c.n_anti
            ));
        }
        out.push('\n');
    }
    for t in &doc.tests {
        if t.issues.is_empty() && !t.unmatched_anti {
            continue;
        }
        let special = t
            .special_kind
            .as_ref()
            .map(|k| format!(" ({k})"))
            .unwrap_or_default();
        out.push_str(&format!(
            "## {}.{} — {}{} — `{}`\n\n{}\n\n",
            t.class, t.test, t.verdict, special, t.layout, t.file
        ));
        if t.unmatched_anti {
            out.push_str("anti-AAA, unmatched pattern: no catalogued anti-pattern applies.\n\n");
        }
        for i in &t.issues {
            out.push_str(&format!("### `{}` (line {})\n\n{}\n\n", i.kind, i.line, i.message));
            out.push_str(&format!("**Drawback:** {}.\n\n", i.drawback));
            out.push_str(&format!(
                "**Suggestion ({}{}):** apply `{}`.\n\n",
                if i.automatable { "automatable" } else { "review" },
                "",
                i.suggestion
            ));
        }
    }
    out
}

pub fn emit_sarif(tests: &[AnalyzedTest]) -> String {
    let doc = build_document(&CorpusSummary::default(), tests);
    let rules: Vec<_> = ALL_ISSUE_KINDS
        .iter()
        .map(|k| {
            json!({
                "id": k.slug(),
                "name": k.to_string(),
                "shortDescription": { "text": k.drawback() },
                "help": { "text": format!("Suggested refactoring: {}", k.suggestion()) }
            })
        })
        .collect();
    let mut results = Vec::new();
    for t in &doc.tests {
        for i in &t.issues {
            results.push(json!({
                "ruleId": i.kind,
                "level": "warning",
                "message": { "text": i.message },
                "locations": [{
                    "physicalLocation": {
                        "artifactLocation": { "uri": t.file },
                        "region": { "startLine": i.line.max(1) }
                    }
                }]
            }));
        }
    }
    let sarif = json!({
        "$schema": "https://raw.githubusercontent.com/oasis-tcs/sarif-spec/master/Schemata/sarif-schema-2.1.0.json",
        "version": "2.1.0",
        "runs": [{
            "tool": {
                "driver": {
                    "name": "aaa-lint",
                    "informationUri": "https://example.invalid/aaa-lint",
                    "rules": rules
                }
            },
            "results": results
        }]
    });
    let mut out = serde_json::to_string_pretty(&sarif).expect("sarif serializes");
    out.push('\n');
    out
}

pub fn emit_report(
    summary: &CorpusSummary,
    tests: &[AnalyzedTest],
    format: &str,
) -> Result<String, AnalysisError> {
    match format {
        "json" => Ok(emit_json(summary, tests)),
        "csv" => emit_csv(tests),
        "md" | "markdown" => Ok(emit_markdown(summary, tests)),
        "sarif" => Ok(emit_sarif(tests)),
        other => Err(AnalysisError::UnknownFormat(other.to_string())),
    }
}
