//! Rule-set configuration shared by the tagger, detectors, and refactor engine.
//!
//! Every name set ships with defaults and can be overridden from a JSON rules
//! file (`--rules`) so projects can extend the tool's proxy for the manual
//! tagging judgment.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

fn default_test_markers() -> BTreeSet<String> {
    ["Test"].iter().map(|s| s.to_string()).collect()
}

fn default_assert_apis() -> BTreeSet<String> {
    [
        "assertEquals",
        "assertTrue",
        "assertFalse",
        "assertNull",
        "assertNotNull",
        "assertSame",
        "assertNotSame",
        "assertArrayEquals",
        "assertThat",
        "assertThrows",
        "assertAll",
        "fail",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn default_verify_apis() -> BTreeSet<String> {
    ["verify"].iter().map(|s| s.to_string()).collect()
}

fn default_setter_prefixes() -> Vec<String> {
    ["set", "add", "put", "register", "config"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_mock_apis() -> BTreeSet<String> {
    ["mock", "when", "thenReturn", "doReturn", "spy"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_mock_prefixes() -> Vec<String> {
    vec!["any".to_string()]
}

fn default_release_set() -> BTreeSet<String> {
    ["close", "shutdown", "delete", "clear", "reset", "tearDown"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_exec_markers() -> Vec<String> {
    vec!["exec".to_string()]
}

fn default_sql_keywords() -> Vec<String> {
    ["SELECT ", "INSERT INTO", "UPDATE ", "DELETE FROM", "CREATE TABLE"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_print_apis() -> BTreeSet<String> {
    ["println", "print", "printf", "printStackTrace", "log", "info", "debug", "warn"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_expansion_limit() -> usize {
    8
}

fn default_true() -> bool {
    true
}

/// Tagging and detection rule sets with the documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Annotation simple names that mark a method as a test case.
    pub test_markers: BTreeSet<String>,
    /// Assertion callee names (JUnit Assert family).
    pub assert_apis: BTreeSet<String>,
    /// Mock-verification callees counted as assert when enabled.
    pub verify_apis: BTreeSet<String>,
    /// Count `verify(...)` style calls as assert.
    pub mock_verification_as_assert: bool,
    /// Callee name prefixes treated as setter-style arrange calls.
    pub setter_prefixes: Vec<String>,
    /// Mock-framework callee names treated as arrange.
    pub mock_apis: BTreeSet<String>,
    /// Mock-framework callee prefixes (e.g. anyString, anyInt).
    pub mock_prefixes: Vec<String>,
    /// Callees that release arranged resources after the last assert.
    pub release_set: BTreeSet<String>,
    /// Callee substrings that mark an external-command wrapper (non-unit test).
    pub exec_markers: Vec<String>,
    /// SQL keyword strings that mark a SQL wrapper (non-unit test).
    pub sql_keywords: Vec<String>,
    /// Print/log callee names cited as evidence for Missing Assert.
    pub print_apis: BTreeSet<String>,
    /// Tag-sheet expansion depth bound.
    pub expansion_limit: usize,
    /// Expand one level into the direct superclass (off by default).
    pub expand_superclass: bool,
    /// Suppress Obscure Assert for plain loops whose body only asserts.
    pub allow_loop_assert: bool,
    /// Accept "runs without exception" tests, silencing Missing Assert.
    pub accept_implicit_no_throw: bool,
    /// Analyze tests that look like integration tests instead of skipping them.
    pub include_it: bool,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            test_markers: default_test_markers(),
            assert_apis: default_assert_apis(),
            verify_apis: default_verify_apis(),
            mock_verification_as_assert: true,
            setter_prefixes: default_setter_prefixes(),
            mock_apis: default_mock_apis(),
            mock_prefixes: default_mock_prefixes(),
            release_set: default_release_set(),
            exec_markers: default_exec_markers(),
            sql_keywords: default_sql_keywords(),
            print_apis: default_print_apis(),
            expansion_limit: default_expansion_limit(),
            expand_superclass: false,
            allow_loop_assert: default_true(),
            accept_implicit_no_throw: false,
            include_it: false,
        }
    }
}

impl RuleConfig {
    pub fn from_file(path: &Path) -> Result<Self, crate::AnalysisError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::AnalysisError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| crate::AnalysisError::Config(e.to_string()))
    }

    pub fn is_assert_callee(&self, name: &str) -> bool {
        self.assert_apis.contains(name)
            || (self.mock_verification_as_assert && self.verify_apis.contains(name))
    }

    pub fn is_setter_name(&self, name: &str) -> bool {
        self.setter_prefixes.iter().any(|p| {
            name.starts_with(p.as_str())
                || (!p.is_empty() && name == p.as_str())
        })
    }

    pub fn is_mock_callee(&self, name: &str) -> bool {
        self.mock_apis.contains(name) || self.mock_prefixes.iter().any(|p| name.starts_with(p.as_str()))
    }

    pub fn is_print_callee(&self, name: &str) -> bool {
        self.print_apis.contains(name)
    }

    /// Print/log call, receiver-aware: `print*` names always count; logger
    /// level names (log, info, debug, warn) only on a logger-looking receiver.
    pub fn is_print_call(&self, callee: &crate::source_model::Callee) -> bool {
        if !self.print_apis.contains(&callee.name) {
            return false;
        }
        if callee.name.starts_with("print") {
            return true;
        }
        let recv = callee.receiver.as_deref().unwrap_or("").to_ascii_lowercase();
        let ty = callee
            .receiver_type
            .as_deref()
            .unwrap_or("")
            .to_ascii_lowercase();
        recv.contains("log") || ty.contains("log")
    }
}
