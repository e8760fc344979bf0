//! Rule-based arrange/act/assert/teardown tagging of tag-sheet rows,
//! approximating the manual tagging procedure, plus Cohen's kappa for
//! comparing tool tags against human gold tags.
//!
//! Final tag priority is total: assert > teardown > act > arrange > unknown.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::RuleConfig;
use crate::source_model::Callee;
use crate::tag_sheet::{ExpandedStatement, Section, TagSheet};
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagValue {
    Arrange,
    Act,
    Assert,
    Teardown,
    Unknown,
}

impl fmt::Display for TagValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TagValue::Arrange => "arrange",
            TagValue::Act => "act",
            TagValue::Assert => "assert",
            TagValue::Teardown => "teardown",
            TagValue::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl TagValue {
    pub fn parse(s: &str) -> TagValue {
        match s.trim().to_ascii_lowercase().as_str() {
            "arrange" => TagValue::Arrange,
            "act" => TagValue::Act,
            "assert" => TagValue::Assert,
            "teardown" => TagValue::Teardown,
            _ => TagValue::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tag {
    pub value: TagValue,
    /// Identifier of the heuristic that fired; empty only for unknown.
    pub rule: &'static str,
    pub confidence: Confidence,
}

impl Tag {
    fn new(value: TagValue, rule: &'static str) -> Tag {
        Tag {
            value,
            rule,
            confidence: Confidence::High,
        }
    }

    fn unknown() -> Tag {
        Tag {
            value: TagValue::Unknown,
            rule: "",
            confidence: Confidence::Low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggedSheet {
    pub sheet: TagSheet,
    pub tags: Vec<Tag>,
    /// Row indices that were considered for act, selected ones first.
    pub act_candidates: Vec<usize>,
}

impl TaggedSheet {
    pub fn values(&self) -> Vec<TagValue> {
        self.tags.iter().map(|t| t.value).collect()
    }

    /// Rows carrying a raw assert (including control-flow rows with a nested
    /// assert), before any precondition re-mapping.
    pub fn raw_assert_rows(&self) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| t.value == TagValue::Assert)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn first_act_index(&self) -> Option<usize> {
        self.tags.iter().position(|t| t.value == TagValue::Act)
    }
}

/// True iff the row or any leaf within a control-flow row invokes an
/// assertion API (or a mock-verification callee when that is enabled).
/// Catch handlers do not count: a `fail` inside a catch propagates a failure
/// but does not make the try row itself an assert.
pub fn tag_assert(row: &ExpandedStatement, cfg: &RuleConfig) -> bool {
    row.statement
        .body_callees()
        .iter()
        .any(|c| !c.constructor && cfg.is_assert_callee(&c.name))
}

/// Constructor calls, declarations with initializers, setter-style calls,
/// and mock-framework calls all arrange.
pub fn tag_arrange(row: &ExpandedStatement, cfg: &RuleConfig) -> bool {
    use crate::source_model::StatementKind;
    if row.statement.kind == StatementKind::DeclarationWithInit {
        return true;
    }
    row.statement.callees.iter().any(|c| {
        c.constructor || cfg.is_setter_name(&c.name) || cfg.is_mock_callee(&c.name)
    })
}

fn camel_tokens(name: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in name.chars() {
        if ch == '_' || ch == '$' || ch.is_ascii_digit() {
            if !current.is_empty() {
                tokens.push(current.to_ascii_lowercase());
                current = String::new();
            }
        } else if ch.is_ascii_uppercase() && !current.is_empty()
            && current.chars().last().map_or(false, |c| c.is_ascii_lowercase())
        {
            tokens.push(current.to_ascii_lowercase());
            current = ch.to_string();
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(current.to_ascii_lowercase());
    }
    tokens
}

/// Test-name tokens with the "test" prefix and any `_scenario` suffix removed.
fn test_name_tokens(test_name: &str) -> Vec<String> {
    let stripped = test_name
        .strip_prefix("test")
        .or_else(|| test_name.strip_prefix("Test"))
        .unwrap_or(test_name);
    let stripped = stripped.split('_').next().unwrap_or(stripped);
    camel_tokens(stripped)
}

fn tokens_match(a: &str, b: &str) -> bool {
    if a == b {
        return a.len() >= 3;
    }
    let cp = a
        .bytes()
        .zip(b.bytes())
        .take_while(|(x, y)| x == y)
        .count();
    let max_len = a.len().max(b.len());
    // stem-like match: testInvoker -> invoke, testDataGenerator -> generate
    cp >= 4 && cp + 5 >= max_len
}

/// Token-overlap similarity between a callee name and the function-under-test
/// hint in the test name.
pub fn name_matches(test_name: &str, callee_name: &str) -> bool {
    let test_tokens = test_name_tokens(test_name);
    let callee_tokens = camel_tokens(callee_name);
    callee_tokens
        .iter()
        .any(|c| test_tokens.iter().any(|t| tokens_match(t, c)))
}

fn production_callees<'a>(row: &'a ExpandedStatement) -> Vec<&'a Callee> {
    if !row.production_call && row.statement.callee.is_some() && !row.statement.kind.is_control_flow()
    {
        // resolvable class-local call left unexpanded (e.g. truncated)
        return Vec::new();
    }
    row.statement.body_callees()
}

struct Candidate {
    row: usize,
    name_matched_callees: Vec<String>,
    primary_name: String,
    has_non_ctor: bool,
}

/// Rank production-call rows for the act and return the selected row indices
/// (winners first) together with all candidate indices and a confidence flag.
pub fn select_act(
    sheet: &TagSheet,
    raw_assert: &[bool],
    test_name: &str,
    cfg: &RuleConfig,
) -> (Vec<usize>, Vec<usize>, Confidence) {
    let rows: Vec<(usize, &ExpandedStatement)> = sheet
        .rows
        .iter()
        .enumerate()
        .filter(|(i, r)| r.section == Section::Body && !raw_assert[*i])
        .collect();

    let any_non_ctor = rows.iter().any(|(_, r)| {
        production_callees(r)
            .iter()
            .any(|c| !c.constructor && !cfg.is_mock_callee(&c.name) && !cfg.is_print_call(c))
    });

    let mut candidates: Vec<Candidate> = Vec::new();
    for (i, row) in &rows {
        let callees = production_callees(row);
        let non_ctor: Vec<&&Callee> = callees
            .iter()
            .filter(|c| !c.constructor && !cfg.is_mock_callee(&c.name) && !cfg.is_print_call(c))
            .collect();
        if !non_ctor.is_empty() {
            let matched: Vec<String> = non_ctor
                .iter()
                .filter(|c| name_matches(test_name, &c.name))
                .map(|c| c.name.clone())
                .collect();
            let primary = non_ctor
                .iter()
                .find(|c| matched.contains(&c.name))
                .or(non_ctor.first())
                .map(|c| c.name.clone())
                .unwrap_or_default();
            candidates.push(Candidate {
                row: *i,
                name_matched_callees: matched,
                primary_name: primary,
                has_non_ctor: true,
            });
        } else if !any_non_ctor {
            // Constructors may carry the act only when nothing else can and
            // the test name points at the constructed type.
            if let Some(ctor) = callees
                .iter()
                .find(|c| c.constructor && name_matches(test_name, &c.name))
            {
                candidates.push(Candidate {
                    row: *i,
                    name_matched_callees: vec![ctor.name.clone()],
                    primary_name: ctor.name.clone(),
                    has_non_ctor: false,
                });
            }
        }
    }

    let all_candidates: Vec<usize> = candidates.iter().map(|c| c.row).collect();
    if candidates.is_empty() {
        return (Vec::new(), all_candidates, Confidence::High);
    }

    let name_matched: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| !c.name_matched_callees.is_empty())
        .collect();
    if !name_matched.is_empty() {
        let names: Vec<&String> = name_matched
            .iter()
            .flat_map(|c| c.name_matched_callees.iter())
            .collect();
        // repeated calls to the same callee all become act
        let selected: Vec<usize> = candidates
            .iter()
            .filter(|c| names.iter().any(|n| *n == &c.primary_name) || !c.name_matched_callees.is_empty())
            .map(|c| c.row)
            .collect();
        return (selected, all_candidates, Confidence::High);
    }

    let first_assert = raw_assert.iter().position(|&a| a);

    // data-flow: the row's result feeds a later assert row
    let flows_to_assert = |c: &Candidate| -> bool {
        let row = &sheet.rows[c.row];
        let Some(var) = &row.statement.defines else {
            return false;
        };
        sheet.rows.iter().enumerate().any(|(j, r)| {
            j > c.row && raw_assert[j] && r.statement.refs.iter().any(|id| id == var)
        })
    };

    let before_first_assert =
        |c: &Candidate| -> bool { first_assert.map_or(true, |fa| c.row < fa) };

    let pick = candidates
        .iter()
        .filter(|c| c.has_non_ctor && flows_to_assert(c) && before_first_assert(c))
        .map(|c| c.row)
        .last()
        .or_else(|| {
            candidates
                .iter()
                .filter(|c| before_first_assert(c))
                .map(|c| c.row)
                .last()
        })
        .or_else(|| candidates.last().map(|c| c.row));

    let Some(pick) = pick else {
        return (Vec::new(), all_candidates, Confidence::Low);
    };
    let picked_name = candidates
        .iter()
        .find(|c| c.row == pick)
        .map(|c| c.primary_name.clone())
        .unwrap_or_default();
    let dataflow_based = candidates
        .iter()
        .any(|c| c.row == pick && flows_to_assert(c));
    let selected: Vec<usize> = candidates
        .iter()
        .filter(|c| c.row == pick || c.primary_name == picked_name)
        .map(|c| c.row)
        .collect();
    let confidence = if dataflow_based {
        Confidence::High
    } else {
        Confidence::Low
    };
    (selected, all_candidates, confidence)
}

/// Tag post-assert release calls and non-assert epilogue rows as teardown.
pub fn teardown_rows(
    sheet: &TagSheet,
    raw_assert: &[bool],
    cfg: &RuleConfig,
) -> Vec<usize> {
    let last_body_assert = sheet
        .rows
        .iter()
        .enumerate()
        .filter(|(i, r)| r.section == Section::Body && raw_assert[*i])
        .map(|(i, _)| i)
        .last();
    let mut out = Vec::new();
    for (i, row) in sheet.rows.iter().enumerate() {
        if raw_assert[i] {
            continue;
        }
        match row.section {
            Section::Epilogue => out.push(i),
            Section::Body | Section::Prologue => {
                if let Some(last) = last_body_assert {
                    if i > last
                        && row
                            .statement
                            .body_callees()
                            .iter()
                            .any(|c| cfg.release_set.contains(&c.name))
                    {
                        out.push(i);
                    }
                }
            }
        }
    }
    out
}

/// Full tagging pass over an expanded sheet.
pub fn tag_sheet(sheet: TagSheet, cfg: &RuleConfig) -> TaggedSheet {
    let raw_assert: Vec<bool> = sheet.rows.iter().map(|r| tag_assert(r, cfg)).collect();
    let test_name = sheet.test_name.clone();
    let (selected, candidates, act_confidence) =
        select_act(&sheet, &raw_assert, &test_name, cfg);
    let teardown = teardown_rows(&sheet, &raw_assert, cfg);

    let mut tags = Vec::with_capacity(sheet.rows.len());
    for (i, row) in sheet.rows.iter().enumerate() {
        let tag = if raw_assert[i] {
            Tag::new(TagValue::Assert, "assert-api")
        } else if teardown.contains(&i) {
            Tag::new(TagValue::Teardown, "release-or-epilogue")
        } else if selected.contains(&i) {
            Tag {
                value: TagValue::Act,
                rule: "act-selection",
                confidence: act_confidence,
            }
        } else if candidates.contains(&i) {
            Tag::new(TagValue::Arrange, "act-candidate-demoted")
        } else if tag_arrange(row, cfg) {
            Tag::new(TagValue::Arrange, "arrange-syntax")
        } else {
            Tag::unknown()
        };
        tags.push(tag);
    }

    let mut act_candidates = selected;
    for c in candidates {
        if !act_candidates.contains(&c) {
            act_candidates.push(c);
        }
    }
    TaggedSheet {
        sheet,
        tags,
        act_candidates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kappa {
    Value(f64),
    /// Chance agreement is 1 and disagreement impossible.
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

/// Cohen's kappa on the two sequences binarized as is-`target` / is-not.
pub fn kappa(
    tool: &[TagValue],
    gold: &[TagValue],
    target: TagValue,
) -> Result<Kappa, AnalysisError> {
    if tool.len() != gold.len() {
        return Err(AnalysisError::LengthMismatch {
            left: tool.len(),
            right: gold.len(),
        });
    }
    if tool.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let n = tool.len() as f64;
    let a: Vec<bool> = tool.iter().map(|t| *t == target).collect();
    let b: Vec<bool> = gold.iter().map(|t| *t == target).collect();
    let po = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / n;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - pe).abs() < f64::EPSILON {
        // both raters constant: identical means perfect agreement
        return Ok(if (po - 1.0).abs() < f64::EPSILON {
            Kappa::Value(1.0)
        } else {
            Kappa::Undefined
        });
    }
    Ok(Kappa::Value((po - pe) / (1.0 - pe)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_model::parse_file;
    use crate::tag_sheet::{attach_lifecycle, expand};
    use std::path::Path;

    fn cfg() -> RuleConfig {
        RuleConfig::default()
    }

    fn tagged(src: &str, test: &str) -> TaggedSheet {
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
        tag_sheet(sheet, &cfg())
    }

    #[test]
    fn assert_api_rows_are_assert() {
        let ts = tagged(
            r#"
public class FooTest {
    @Test public void testGetByPrefix_Drop(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);}
}
"#,
            "testGetByPrefix_Drop",
        );
        assert_eq!(
            ts.values(),
            vec![TagValue::Arrange, TagValue::Arrange, TagValue::Act, TagValue::Assert]
        );
    }

    #[test]
    fn println_is_not_assert_and_nested_fail_is() {
        let ts = tagged(
            r#"
public class FooTest {
    @Test public void testLoop(){
        for (int c : list) { if (c != 1) { fail("Err"); } }
        System.out.println(d);
    }
}
"#,
            "testLoop",
        );
        assert_eq!(ts.tags[0].value, TagValue::Assert);
        assert_ne!(ts.tags[1].value, TagValue::Assert);
    }

    #[test]
    fn verify_counts_as_assert_by_default() {
        let ts = tagged(
            r#"
public class FooTest {
    @Test public void testSend(){
        svc.send(msg);
        verify(channel).send(msg);
    }
}
"#,
            "testSend",
        );
        assert_eq!(ts.tags[1].value, TagValue::Assert);
        assert_eq!(ts.tags[0].value, TagValue::Act);
    }

    #[test]
    fn name_similarity_selects_act() {
        let ts = tagged(
            r#"
public class ClusterInvokerTest {
    @Test public void testInvoker_normal(){
        Invoker mock = mock(Invoker.class);
        cluster.invoke(inv);
        assertTrue(done);
    }
}
"#,
            "testInvoker_normal",
        );
        assert_eq!(ts.tags[1].value, TagValue::Act);
        assert_eq!(ts.tags[0].value, TagValue::Arrange);
    }

    #[test]
    fn latest_before_assert_fallback_is_low_confidence() {
        let ts = tagged(
            r#"
public class MultiIteratorTest {
    @Test public void test2(){
        env.configure(opts);
        iter.seek(range, cols, false);
        assertEquals(5, iter.next());
    }
}
"#,
            "test2",
        );
        // "test2" gives no clue; seek is the latest candidate before the assert
        assert_eq!(ts.tags[1].value, TagValue::Act);
        assert_eq!(ts.tags[1].confidence, Confidence::Low);
    }

    #[test]
    fn dataflow_into_assert_selects_act() {
        let ts = tagged(
            r#"
public class OpaqueTest {
    @Test public void testX(){
        svc.warmup();
        Result r = svc.compute(input);
        helperLog(r);
        assertEquals(42, r);
    }
    private void helperLog(Result r){ }
}
"#,
            "testX",
        );
        assert_eq!(ts.tags[1].value, TagValue::Act);
        assert_eq!(ts.tags[1].confidence, Confidence::High);
        assert_eq!(ts.tags[0].value, TagValue::Arrange);
    }

    #[test]
    fn repeated_act_callee_all_become_act() {
        let ts = tagged(
            r#"
public class FooTest {
    @Test public void testGetByPrefix(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);
        tc.set(SCAN_PREFIX);
        p = tc.getAllProperties();
        assertEquals("scan", p);}
}
"#,
            "testGetByPrefix",
        );
        use TagValue::*;
        assert_eq!(
            ts.values(),
            vec![Arrange, Arrange, Act, Assert, Arrange, Act, Assert]
        );
    }

    #[test]
    fn epilogue_assert_stays_assert_and_release_call_is_teardown() {
        let ts = tagged(
            r#"
public class DataTest {
    @After public void verify(){ assertNotNull(data.getValue()); }
    @Test public void testConfigBig(){
        data.config("Big");
        assertTrue(data.isBig());
        client.close();
    }
}
"#,
            "testConfigBig",
        );
        let n = ts.tags.len();
        assert_eq!(ts.tags[n - 1].value, TagValue::Assert); // epilogue assert
        assert_eq!(ts.tags[n - 2].value, TagValue::Teardown); // client.close()
        assert_eq!(ts.tags[0].value, TagValue::Act); // data.config("Big")
    }

    #[test]
    fn no_post_assert_rows_leaves_tags_unchanged() {
        let ts = tagged(
            r#"
public class FooTest {
    @Test public void testRun(){
        Service s = new Service();
        s.run();
        assertTrue(s.ok());
    }
}
"#,
            "testRun",
        );
        assert!(ts.tags.iter().all(|t| t.value != TagValue::Teardown));
    }

    #[test]
    fn exactly_one_tag_per_row_and_deterministic() {
        let src = r#"
public class FooTest {
    @Test public void testThing(){
        Thing t = new Thing();
        t.prepare();
        int v = t.thing();
        assertEquals(1, v);
        t.close();
    }
}
"#;
        let a = tagged(src, "testThing");
        let b = tagged(src, "testThing");
        assert_eq!(a, b);
        assert_eq!(a.tags.len(), a.sheet.rows.len());
    }

    #[test]
    fn act_implies_production_call_row_exists() {
        let src = r#"
public class FooTest {
    @Test public void testGo(){
        runner.go();
        assertTrue(ok);
    }
}
"#;
        let ts = tagged(src, "testGo");
        if ts.tags.iter().any(|t| t.value == TagValue::Act) {
            assert!(ts.sheet.rows.iter().any(|r| r.production_call));
        }
    }

    #[test]
    fn ctor_only_test_gets_no_act_without_name_match() {
        let ts = tagged(
            r#"
public class ClientTest {
    @Test public void testEquals() throws Exception {
        Client a = new Client("Bob");
        Client b = new Client("Bob");
        assertEquals(a, b);}
}
"#,
            "testEquals",
        );
        use TagValue::*;
        assert_eq!(ts.values(), vec![Arrange, Arrange, Assert]);
    }

    #[test]
    fn static_call_with_name_match_is_act() {
        let ts = tagged(
            r#"
public class StaticTest {
    @Test public void testStatic() {
        int a = SomeClass.aStaticMethod();
        assertEquals(1,a);}
}
"#,
            "testStatic",
        );
        assert_eq!(ts.values(), vec![TagValue::Act, TagValue::Assert]);
    }

    #[test]
    fn kappa_identical_mixed_is_one() {
        use TagValue::*;
        let seq = [Act, Arrange, Assert, Arrange];
        for target in [Arrange, Act, Assert] {
            assert_eq!(kappa(&seq, &seq, target).unwrap(), Kappa::Value(1.0));
        }
    }

    #[test]
    fn kappa_hand_computed_example() {
        use TagValue::*;
        let tool = [Act, Arrange, Arrange, Arrange];
        let gold = [Arrange, Arrange, Arrange, Act];
        let k = kappa(&tool, &gold, Act).unwrap().value().unwrap();
        assert!((k - (-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn kappa_constant_identical_is_one() {
        use TagValue::*;
        let seq = [Arrange, Arrange, Arrange];
        assert_eq!(kappa(&seq, &seq, Act).unwrap(), Kappa::Value(1.0));
    }

    #[test]
    fn kappa_symmetric_and_length_checked() {
        use TagValue::*;
        let a = [Act, Arrange, Assert, Act, Arrange];
        let b = [Arrange, Arrange, Assert, Act, Act];
        let k1 = kappa(&a, &b, Act).unwrap().value().unwrap();
        let k2 = kappa(&b, &a, Act).unwrap().value().unwrap();
        assert!((k1 - k2).abs() < 1e-12);
        assert!(kappa(&a, &b[..3], Act).is_err());
    }

    #[test]
    fn token_matching_examples() {
        assert!(name_matches("testInvoker_normal", "invoke"));
        assert!(name_matches("testGetByPrefix_Drop", "getAllProperties"));
        assert!(name_matches("testDataGenerator", "generate"));
        assert!(name_matches("testSubscription", "subscribe"));
        assert!(!name_matches("testHttpclient", "execute"));
        assert!(!name_matches("test2", "seek"));
    }
}
