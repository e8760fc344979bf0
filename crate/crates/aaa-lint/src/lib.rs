//! Static analysis of JUnit test cases against the arrange-act-assert (AAA)
//! structure.
//!
//! The pipeline parses Java test sources into a structural model, flattens
//! each test case into a "tag-sheet" by inlining test-class helper methods,
//! tags every row as arrange/act/assert/teardown, matches the resulting
//! layout against `[arrange]+[act]+[assert]+`, recognizes sanctioned special
//! designs, detects anti-patterns and in-block design flaws, and computes or
//! applies the corresponding refactorings. Corpus-level statistics (category
//! proportions, Mann-Whitney U comparisons, Cohen's kappa against gold tags)
//! round out the reports.

use std::path::PathBuf;

use thiserror::Error;

pub mod classifier;
pub mod config;
pub mod detector;
pub mod refactor;
pub mod report;
pub mod run;
pub mod source_model;
pub mod stats;
pub mod tag_sheet;
pub mod tagger;

pub use classifier::{Classification, LayoutEncoding, SpecialKind, Symbol, Verdict};
pub use config::RuleConfig;
pub use detector::{Issue, IssueKind, RefactoringKind, TestMetrics};
pub use refactor::{BehaviorNote, RefactoringPlan, SourceEdit};
pub use report::{AnalyzedTest, ReportDocument};
pub use run::{run, RunConfig, RunOutcome};
pub use source_model::{
    HelperMethod, LifecycleKind, SourceCorpus, Statement, StatementKind, TestCaseModel,
    TestClassModel,
};
pub use stats::{CorpusSummary, TestRecord};
pub use tag_sheet::{ExpandedStatement, Section, TagSheet};
pub use tagger::{Tag, TagValue, TaggedSheet};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("parse error in {path} at {line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("tag sequences have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty sample passed to a two-sample test")]
    EmptySample,
    #[error("stale edit: file content no longer matches the plan at {path}:{line}")]
    StaleEdit { path: PathBuf, line: usize },
    #[error("refactored output failed to re-parse, rolled back: {0}")]
    Rollback(String),
    #[error("plan contains overlapping edits")]
    OverlappingEdits,
    #[error("unknown report format: {0}")]
    UnknownFormat(String),
}
