//! End-to-end pipeline: discover → parse → expand → tag → classify →
//! detect → (fix) → summarize → emit.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::classify;
use crate::config::RuleConfig;
use crate::detector::{compute_metrics, detect_all, Issue, IssueKind};
use crate::refactor::{
    apply, draft_split_multiple_aaa, draft_split_per_act, plan_assert_to_assume,
    plan_if_return_to_assume, plan_remove_catch, write_atomic, RefactoringPlan,
};
use crate::report::{emit_report, AnalyzedTest};
use crate::source_model::{default_include_globs, SourceCorpus};
use crate::stats::{summarize, TestRecord};
use crate::tag_sheet::{attach_lifecycle, expand, read_tag_csv};
use crate::tagger::{kappa, tag_sheet, Kappa, TagValue};
use crate::AnalysisError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub roots: Vec<PathBuf>,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub rules: RuleConfig,
    /// Sample fraction in (0, 1]; None analyzes everything.
    pub sample: Option<f64>,
    pub seed: u64,
    /// Issue kinds to fix in place; must be automatable.
    pub fix_kinds: Vec<IssueKind>,
    pub formats: Vec<String>,
    pub gold: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            roots: Vec::new(),
            include: default_include_globs(),
            exclude: Vec::new(),
            rules: RuleConfig::default(),
            sample: None,
            seed: 0,
            fix_kinds: Vec::new(),
            formats: vec!["json".to_string()],
            gold: None,
            out_dir: None,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Emitted reports keyed by format name.
    pub reports: BTreeMap<String, String>,
    pub diagnostics: Vec<String>,
    /// Gold-agreement summary when a gold CSV was supplied.
    pub gold_text: Option<String>,
    pub tests: Vec<AnalyzedTest>,
}

fn validate(config: &RunConfig) -> Result<(), AnalysisError> {
    if let Some(f) = config.sample {
        if !(f > 0.0 && f <= 1.0) {
            return Err(AnalysisError::Config(format!(
                "sample fraction {f} outside (0, 1]"
            )));
        }
    }
    for kind in &config.fix_kinds {
        if !kind.automatable() {
            return Err(AnalysisError::Config(format!(
                "{} is not automatable",
                kind.slug()
            )));
        }
    }
    if config.roots.is_empty() {
        return Err(AnalysisError::Config("no root paths given".to_string()));
    }
    Ok(())
}

/// Seeded selection over the lexicographically sorted test list: the seed
/// fully determines the sample.
fn sample_keys(keys: &mut Vec<(PathBuf, String, String)>, fraction: f64, seed: u64) {
    keys.sort();
    let n = keys.len();
    let take = ((fraction * n as f64).ceil() as usize).min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    keys.shuffle(&mut rng);
    keys.truncate(take);
    keys.sort();
}

struct PerTest {
    analyzed: AnalyzedTest,
    tags: Vec<TagValue>,
    plans: Vec<RefactoringPlan>,
}

fn plan_for(
    issue: &Issue,
    ts: &crate::tagger::TaggedSheet,
    t: &crate::source_model::TestCaseModel,
    class: &crate::source_model::TestClassModel,
    cls: &crate::classifier::Classification,
    content: &str,
) -> Option<RefactoringPlan> {
    match issue.kind {
        IssueKind::AssertPrecondition => Some(plan_assert_to_assume(issue, ts, class)),
        IssueKind::ArrangeAndQuit => Some(plan_if_return_to_assume(issue, ts, class)),
        IssueKind::SuppressedException => Some(plan_remove_catch(issue, ts, t, content)),
        IssueKind::MultipleAAA => draft_split_multiple_aaa(cls, ts, t),
        IssueKind::MultipleActs => draft_split_per_act(issue, ts, t),
        _ => None,
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, AnalysisError> {
    validate(config)?;
    let corpus = SourceCorpus::discover(
        &config.roots,
        &config.include,
        &config.exclude,
        &config.rules,
    )?;
    let mut diagnostics: Vec<String> = corpus
        .failures
        .iter()
        .map(|f| {
            format!(
                "parse failure: {} at {}:{}: {}",
                f.path.display(),
                f.line,
                f.column,
                f.message
            )
        })
        .collect();

    let mut selected: Option<BTreeSet<(PathBuf, String, String)>> = None;
    if let Some(fraction) = config.sample {
        let mut keys: Vec<(PathBuf, String, String)> = corpus
            .files
            .iter()
            .flat_map(|f| {
                f.classes.iter().flat_map(|c| {
                    c.test_methods
                        .iter()
                        .map(|t| (f.path.clone(), c.simple_name.clone(), t.name.clone()))
                })
            })
            .collect();
        sample_keys(&mut keys, fraction, config.seed);
        selected = Some(keys.into_iter().collect());
    }

    let cfg = &config.rules;
    let project_types = &corpus.project_types;
    let mut per_test: Vec<PerTest> = corpus
        .files
        .par_iter()
        .flat_map_iter(|file| {
            let content = std::fs::read_to_string(&file.path).unwrap_or_default();
            let mut out = Vec::new();
            for class in &file.classes {
                for t in &class.test_methods {
                    if let Some(sel) = &selected {
                        let key = (file.path.clone(), class.simple_name.clone(), t.name.clone());
                        if !sel.contains(&key) {
                            continue;
                        }
                    }
                    let sheet = expand(t, class, &file.path, cfg.expansion_limit);
                    let sheet = attach_lifecycle(sheet, class);
                    let ts = tag_sheet(sheet, cfg);
                    let cls = classify(t, class, &ts, project_types, cfg);
                    let issues = detect_all(t, &ts, &cls, cfg);
                    let metrics = compute_metrics(t, &ts);
                    let plans = issues
                        .iter()
                        .filter_map(|i| plan_for(i, &ts, t, class, &cls, &content))
                        .collect();
                    out.push(PerTest {
                        analyzed: AnalyzedTest {
                            record: TestRecord {
                                file: file.path.clone(),
                                class: class.simple_name.clone(),
                                test: t.name.clone(),
                                verdict: cls.verdict,
                                special_kind: cls.special_kind,
                                blocks: cls.blocks,
                                metrics,
                                issues: issues.iter().map(|i| i.kind).collect(),
                            },
                            layout: cls.encoding.layout_string(),
                            issues,
                        },
                        tags: ts.values(),
                        plans,
                    });
                }
            }
            out
        })
        .collect();
    per_test.sort_by(|a, b| {
        let ka = (
            &a.analyzed.record.file,
            &a.analyzed.record.class,
            &a.analyzed.record.test,
        );
        let kb = (
            &b.analyzed.record.file,
            &b.analyzed.record.class,
            &b.analyzed.record.test,
        );
        ka.cmp(&kb)
    });

    // apply requested fixes, one plan per file pass; overlapping plans in the
    // same file go stale and are reported for a re-run
    if !config.fix_kinds.is_empty() {
        let mut touched: BTreeSet<PathBuf> = BTreeSet::new();
        for pt in &per_test {
            for plan in &pt.plans {
                if !plan.automatable
                    || !config
                        .fix_kinds
                        .iter()
                        .any(|k| k.suggestion() == plan.kind)
                {
                    continue;
                }
                let path = &plan.target.file;
                if touched.contains(path) {
                    diagnostics.push(format!(
                        "skipped {} on {}: file already patched this run, re-run to apply",
                        plan.kind,
                        path.display()
                    ));
                    continue;
                }
                let content = std::fs::read_to_string(path).map_err(|e| AnalysisError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                match apply(plan, &content) {
                    Ok(patched) => {
                        write_atomic(path, &patched)?;
                        touched.insert(path.clone());
                        diagnostics.push(format!(
                            "applied {} to {}.{} in {}",
                            plan.kind,
                            plan.target.class,
                            plan.target.test,
                            path.display()
                        ));
                    }
                    Err(e) => diagnostics.push(format!("fix failed: {e}")),
                }
            }
        }
    }

    // review-required split drafts become patch files under the out dir
    if let Some(out_dir) = &config.out_dir {
        let patch_dir = out_dir.join("patches");
        for pt in &per_test {
            for plan in &pt.plans {
                if plan.automatable || plan.edits.is_empty() {
                    continue;
                }
                let path = &plan.target.file;
                let Ok(content) = std::fs::read_to_string(path) else {
                    continue;
                };
                let edit = &plan.edits[0];
                if edit.span.end_byte > content.len() {
                    continue;
                }
                let mut patched = content.clone();
                patched.replace_range(
                    edit.span.start_byte..edit.span.end_byte,
                    &edit.replacement,
                );
                let name = format!(
                    "{}.{}.{}.patch",
                    plan.target.class, plan.target.test, plan.kind
                );
                let diff = similar::TextDiff::from_lines(&content, &patched)
                    .unified_diff()
                    .header(
                        &path.display().to_string(),
                        &path.display().to_string(),
                    )
                    .to_string();
                std::fs::create_dir_all(&patch_dir).map_err(|e| AnalysisError::Io {
                    path: patch_dir.clone(),
                    source: e,
                })?;
                write_atomic(&patch_dir.join(name), &diff)?;
            }
        }
    }

    let gold_text = match &config.gold {
        Some(path) => Some(gold_agreement(path, &per_test)?),
        None => None,
    };

    let tests: Vec<AnalyzedTest> = per_test.into_iter().map(|pt| pt.analyzed).collect();
    let records: Vec<TestRecord> = tests.iter().map(|t| t.record.clone()).collect();
    let summary = summarize(&records);

    let mut reports = BTreeMap::new();
    for format in &config.formats {
        let doc = emit_report(&summary, &tests, format)?;
        if let Some(out_dir) = &config.out_dir {
            std::fs::create_dir_all(out_dir).map_err(|e| AnalysisError::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            let ext = if format == "markdown" { "md" } else { format };
            write_atomic(&out_dir.join(format!("report.{ext}")), &doc)?;
        }
        reports.insert(format.clone(), doc);
    }

    let has_issues = tests.iter().any(|t| !t.issues.is_empty());
    Ok(RunOutcome {
        exit_code: i32::from(has_issues),
        reports,
        diagnostics,
        gold_text,
        tests,
    })
}

const GOLD_TARGETS: [TagValue; 3] = [TagValue::Arrange, TagValue::Act, TagValue::Assert];
const ALL_TAGS: [TagValue; 5] = [
    TagValue::Arrange,
    TagValue::Act,
    TagValue::Assert,
    TagValue::Teardown,
    TagValue::Unknown,
];

/// Per-A kappa plus a tool-vs-gold confusion table, matched on
/// (class, test, row sequence).
fn gold_agreement(path: &std::path::Path, per_test: &[PerTest]) -> Result<String, AnalysisError> {
    let rows = read_tag_csv(path)?;
    let mut gold: BTreeMap<(String, String), BTreeMap<usize, TagValue>> = BTreeMap::new();
    for row in rows {
        gold.entry((row.test_class.clone(), row.test_case.clone()))
            .or_default()
            .insert(row.seq, TagValue::parse(&row.tag));
    }
    let mut tool_seq = Vec::new();
    let mut gold_seq = Vec::new();
    for pt in per_test {
        let key = (
            pt.analyzed.record.class.clone(),
            pt.analyzed.record.test.clone(),
        );
        let Some(tags) = gold.get(&key) else { continue };
        for (seq, tool_tag) in pt.tags.iter().enumerate() {
            if let Some(gold_tag) = tags.get(&seq) {
                tool_seq.push(*tool_tag);
                gold_seq.push(*gold_tag);
            }
        }
    }
    if tool_seq.is_empty() {
        return Err(AnalysisError::Config(format!(
            "gold file {} matched no analyzed rows",
            path.display()
        )));
    }
    let mut out = format!("gold agreement over {} rows:\n", tool_seq.len());
    for target in GOLD_TARGETS {
        let k = kappa(&tool_seq, &gold_seq, target)?;
        match k {
            Kappa::Value(v) => out.push_str(&format!("  {target}: kappa = {v:.4}\n")),
            Kappa::Undefined => out.push_str(&format!("  {target}: kappa undefined\n")),
        }
    }
    out.push_str("confusion (tool rows x gold columns):\n");
    out.push_str(&format!("  {:>9}", ""));
    for g in ALL_TAGS {
        out.push_str(&format!(" {g:>8}"));
    }
    out.push('\n');
    for t in ALL_TAGS {
        out.push_str(&format!("  {t:>9}"));
        for g in ALL_TAGS {
            let n = tool_seq
                .iter()
                .zip(&gold_seq)
                .filter(|(a, b)| **a == t && **b == g)
                .count();
            out.push_str(&format!(" {n:>8}"));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn fixture_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("CleanTest.java"),
            r#"import org.junit.Test;

public class CleanTest {
    @Test
    public void testGetByPrefix_Drop(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);}
}
"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("PollTest.java"),
            r#"import org.junit.Test;

public class PollTest {
    @Test
    public void testPoll(){
       Snapshot s = sqlMng.createSnapshot();
       assertNotNull(s);
       String v = s.poll();
       assertEquals("8/22/2022",v);}
}
"#,
        )
        .unwrap();
        dir
    }

    fn config_for(dir: &tempfile::TempDir) -> RunConfig {
        RunConfig {
            roots: vec![dir.path().to_path_buf()],
            ..RunConfig::default()
        }
    }

    #[test]
    fn exit_one_iff_issues_found() {
        let dir = fixture_dir();
        let outcome = run(&config_for(&dir)).unwrap();
        assert_eq!(outcome.exit_code, 1);
        assert_eq!(outcome.tests.len(), 2);
        // remove the flawed fixture: clean corpus exits 0
        fs::remove_file(dir.path().join("PollTest.java")).unwrap();
        let outcome = run(&config_for(&dir)).unwrap();
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn identical_config_and_seed_give_identical_json() {
        let dir = fixture_dir();
        let mut cfg = config_for(&dir);
        cfg.sample = Some(1.0);
        cfg.seed = 7;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.reports["json"], b.reports["json"]);
        assert!(!a.reports["json"].is_empty());
    }

    #[test]
    fn sample_fraction_half_is_seed_determined() {
        let dir = fixture_dir();
        let mut cfg = config_for(&dir);
        cfg.sample = Some(0.5);
        cfg.seed = 1;
        let a = run(&cfg).unwrap();
        assert_eq!(a.tests.len(), 1);
        let b = run(&cfg).unwrap();
        assert_eq!(
            a.tests[0].record.test, b.tests[0].record.test,
            "same seed, same sample"
        );
    }

    #[test]
    fn fix_assert_precondition_patches_and_converges() {
        let dir = fixture_dir();
        let mut cfg = config_for(&dir);
        cfg.fix_kinds = vec![IssueKind::AssertPrecondition];
        let outcome = run(&cfg).unwrap();
        assert_eq!(outcome.exit_code, 1);
        let patched = fs::read_to_string(dir.path().join("PollTest.java")).unwrap();
        assert!(patched.contains("assumeNotNull(s);"));
        // re-run: the issue is gone
        let outcome = run(&cfg).unwrap();
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn unparseable_file_is_a_diagnostic_not_a_crash() {
        let dir = fixture_dir();
        fs::write(dir.path().join("BrokenTest.java"), "class {{{ not java").unwrap();
        let outcome = run(&config_for(&dir)).unwrap();
        assert_eq!(outcome.diagnostics.len(), 1);
        assert!(outcome.diagnostics[0].contains("BrokenTest.java"));
        assert_eq!(outcome.tests.len(), 2, "remaining analysis completes");
        assert_eq!(outcome.exit_code, 1);
    }

    #[test]
    fn missing_root_is_an_error() {
        let cfg = RunConfig {
            roots: vec![PathBuf::from("/no/such/dir")],
            ..RunConfig::default()
        };
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn invalid_sample_and_fix_kinds_are_rejected() {
        let dir = fixture_dir();
        let mut cfg = config_for(&dir);
        cfg.sample = Some(1.5);
        assert!(run(&cfg).is_err());
        let mut cfg = config_for(&dir);
        cfg.fix_kinds = vec![IssueKind::MultipleAAA];
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn gold_mode_reports_per_a_kappa() {
        let dir = fixture_dir();
        // export the tool's own tags as gold: kappa 1.0 everywhere defined
        let base = run(&config_for(&dir)).unwrap();
        let _ = base;
        let mut cfg = config_for(&dir);
        let gold_path = dir.path().join("gold.csv");
        // build the gold csv from a fresh tagging pass
        let corpus = SourceCorpus::discover(&cfg.roots, &cfg.include, &cfg.exclude, &cfg.rules)
            .unwrap();
        let mut buf = Vec::new();
        let mut first = true;
        for file in &corpus.files {
            for class in &file.classes {
                for t in &class.test_methods {
                    let sheet = expand(t, class, &file.path, cfg.rules.expansion_limit);
                    let sheet = attach_lifecycle(sheet, class);
                    let ts = tag_sheet(sheet, &cfg.rules);
                    let tags: Vec<String> =
                        ts.tags.iter().map(|t| t.value.to_string()).collect();
                    crate::tag_sheet::write_sheet_csv(&ts.sheet, Some(&tags), &mut buf, first)
                        .unwrap();
                    first = false;
                }
            }
        }
        fs::write(&gold_path, &buf).unwrap();
        cfg.gold = Some(gold_path);
        let outcome = run(&cfg).unwrap();
        let text = outcome.gold_text.unwrap();
        assert!(text.contains("arrange: kappa = 1.0000"));
        assert!(text.contains("act: kappa = 1.0000"));
        assert!(text.contains("assert: kappa = 1.0000"));
        assert!(text.contains("confusion"));
    }

    #[test]
    fn out_dir_receives_reports_and_patches() {
        let dir = fixture_dir();
        fs::write(
            dir.path().join("QemuTest.java"),
            r#"import org.junit.Test;

public class QemuTest {
    @Test
    public void testCreateAndInfo(){
        QemuImg qemu = new QemuImg();
        QemuImgFile file = new QemuImgFile("disk");
        qemu.create(file);
        Map info = qemu.info(file);
        assertEquals(SIZE, info.size());}
}
"#,
        )
        .unwrap();
        let out = tempfile::tempdir().unwrap();
        let mut cfg = config_for(&dir);
        cfg.formats = vec!["json".into(), "md".into(), "sarif".into(), "csv".into()];
        cfg.out_dir = Some(out.path().to_path_buf());
        run(&cfg).unwrap();
        for name in ["report.json", "report.md", "report.sarif", "report.csv"] {
            assert!(out.path().join(name).exists(), "{name} missing");
        }
        let patch = out
            .path()
            .join("patches")
            .join("QemuTest.testCreateAndInfo.SplitPerAct.patch");
        assert!(patch.exists());
        let text = fs::read_to_string(patch).unwrap();
        assert!(text.contains("+    public void testCreate()") || text.contains("testCreate"));
        assert!(text.starts_with("---"));
    }
}
