//! Corpus-level statistics: category proportions and Mann-Whitney U
//! comparisons of the per-test metrics between AAA and anti-AAA groups.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::classifier::{SpecialKind, Verdict};
use crate::detector::{IssueKind, TestMetrics};
use crate::AnalysisError;

/// Per-test analysis record, the unit of aggregation and CSV export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub file: PathBuf,
    pub class: String,
    pub test: String,
    pub verdict: Verdict,
    pub special_kind: Option<SpecialKind>,
    pub blocks: usize,
    pub metrics: TestMetrics,
    pub issues: Vec<IssueKind>,
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-NaN sample"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn erf(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn clamp_p(p: f64) -> f64 {
    p.min(1.0).max(f64::MIN_POSITIVE)
}

fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut combined: Vec<f64> = x.to_vec();
    combined.extend_from_slice(y);
    let ranks = midranks(&combined);
    let r1: f64 = ranks[..x.len()].iter().sum();
    r1 - (x.len() * (x.len() + 1)) as f64 / 2.0
}

fn exact_p(x: &[f64], y: &[f64], u_obs: f64) -> f64 {
    let n1 = x.len();
    let n = n1 + y.len();
    // with no ties the U distribution depends only on rank positions
    let mut le = 0u64;
    let mut ge = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        let rank_sum: u32 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| i as u32 + 1)
            .sum();
        let u = rank_sum as f64 - (n1 * (n1 + 1)) as f64 / 2.0;
        if u <= u_obs + 1e-12 {
            le += 1;
        }
        if u >= u_obs - 1e-12 {
            ge += 1;
        }
    }
    let p = 2.0 * (le.min(ge) as f64) / total as f64;
    clamp_p(p)
}

fn approx_p(x: &[f64], y: &[f64], u_obs: f64) -> f64 {
    let n1 = x.len() as f64;
    let n2 = y.len() as f64;
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let mut combined: Vec<f64> = x.to_vec();
    combined.extend_from_slice(y);
    combined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < combined.len() {
        let mut j = i;
        while j + 1 < combined.len() && combined[j + 1] == combined[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u_obs - mu).abs() - 0.5).max(0.0) / variance.sqrt();
    clamp_p(2.0 * (1.0 - normal_cdf(z)))
}

/// Two-sided Mann-Whitney U test with midrank ties. Exact by enumeration
/// when the combined size is at most 12 and no ties exist; otherwise the
/// normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if x.is_empty() || y.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let u = u_statistic(x, y);
    let mut combined: Vec<f64> = x.to_vec();
    combined.extend_from_slice(y);
    let p = if combined.len() <= 12 && !has_ties(&combined) {
        exact_p(x, y, u)
    } else {
        approx_p(x, y, u)
    };
    Ok((u, p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: &'static str,
    /// None when either group is empty.
    pub u: Option<f64>,
    pub p: Option<f64>,
    pub n_aaa: usize,
    pub n_anti: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CorpusSummary {
    pub analyzed_unit_tests: usize,
    pub non_unit_tests: usize,
    pub classic: usize,
    pub special: usize,
    pub anti: usize,
    pub special_counts: Vec<(SpecialKind, usize)>,
    pub issue_counts: Vec<(IssueKind, usize)>,
    /// Shares of {classic, special, anti} over analyzed unit tests.
    pub proportions: Option<(f64, f64, f64)>,
    pub comparisons: Vec<Comparison>,
    pub warning: Option<String>,
}

const METRICS: [&str; 5] = ["loc", "cyclomatic", "n_arrange", "n_act", "n_assert"];

fn metric_value(m: &TestMetrics, name: &str) -> f64 {
    match name {
        "loc" => m.loc as f64,
        "cyclomatic" => m.cyclomatic as f64,
        "n_arrange" => m.n_arrange as f64,
        "n_act" => m.n_act as f64,
        "n_assert" => m.n_assert as f64,
        _ => unreachable!("metric name"),
    }
}

/// Counts, proportions, and AAA-vs-AntiAAA comparisons over the records.
/// The AAA group is ClassicAAA together with SpecialAAA.
pub fn summarize(records: &[TestRecord]) -> CorpusSummary {
    let mut summary = CorpusSummary::default();
    for r in records {
        match r.verdict {
            Verdict::ClassicAAA => summary.classic += 1,
            Verdict::SpecialAAA => summary.special += 1,
            Verdict::AntiAAA => summary.anti += 1,
            Verdict::NonUnitTest => summary.non_unit_tests += 1,
        }
    }
    summary.analyzed_unit_tests = summary.classic + summary.special + summary.anti;
    if summary.analyzed_unit_tests == 0 {
        summary.warning = Some("no unit tests analyzed".to_string());
        return summary;
    }
    for kind in [
        SpecialKind::NoArrangeStaticConstructor,
        SpecialKind::SharedBeforeAfter,
        SpecialKind::ExpectedException,
        SpecialKind::ImplicitAct,
    ] {
        let n = records
            .iter()
            .filter(|r| r.special_kind == Some(kind))
            .count();
        if n > 0 {
            summary.special_counts.push((kind, n));
        }
    }
    for kind in crate::detector::ALL_ISSUE_KINDS {
        let n = records
            .iter()
            .filter(|r| r.issues.contains(&kind))
            .count();
        if n > 0 {
            summary.issue_counts.push((kind, n));
        }
    }
    let total = summary.analyzed_unit_tests as f64;
    summary.proportions = Some((
        summary.classic as f64 / total,
        summary.special as f64 / total,
        summary.anti as f64 / total,
    ));
    let aaa: Vec<&TestRecord> = records
        .iter()
        .filter(|r| matches!(r.verdict, Verdict::ClassicAAA | Verdict::SpecialAAA))
        .collect();
    let anti: Vec<&TestRecord> = records
        .iter()
        .filter(|r| r.verdict == Verdict::AntiAAA)
        .collect();
    for metric in METRICS {
        let x: Vec<f64> = aaa.iter().map(|r| metric_value(&r.metrics, metric)).collect();
        let y: Vec<f64> = anti
            .iter()
            .map(|r| metric_value(&r.metrics, metric))
            .collect();
        let (u, p) = match mann_whitney_u(&x, &y) {
            Ok((u, p)) => (Some(u), Some(p)),
            Err(_) => (None, None),
        };
        summary.comparisons.push(Comparison {
            metric,
            u,
            p,
            n_aaa: x.len(),
            n_anti: y.len(),
        });
    }
    summary
}

/// CSV export of per-test records.
pub fn write_records_csv<W: Write>(records: &[TestRecord], writer: W) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record([
        "file",
        "class",
        "test",
        "verdict",
        "special_kind",
        "blocks",
        "loc",
        "cyclomatic",
        "n_arrange",
        "n_act",
        "n_assert",
        "issues",
    ])
    .map_err(|e| AnalysisError::Config(format!("csv: {e}")))?;
    for r in records {
        let issues = r
            .issues
            .iter()
            .map(|k| k.slug().to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.file.display().to_string(),
            r.class.clone(),
            r.test.clone(),
            r.verdict.to_string(),
            r.special_kind.map(|k| k.to_string()).unwrap_or_default(),
            r.blocks.to_string(),
            r.metrics.loc.to_string(),
            r.metrics.cyclomatic.to_string(),
            r.metrics.n_arrange.to_string(),
            r.metrics.n_act.to_string(),
            r.metrics.n_assert.to_string(),
            issues,
        ])
        .map_err(|e| AnalysisError::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| AnalysisError::Io {
        path: PathBuf::from("<csv>"),
        source: e,
    })?;
    Ok(())
}
