//! Layout encoding of a tagged sheet and classification against the
//! `[arrange]+[act]+[assert]+` pattern, including the four sanctioned
//! special designs.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::config::RuleConfig;
use crate::source_model::{is_probable_non_unit_test, TestCaseModel, TestClassModel};
use crate::tag_sheet::Section;
use crate::tagger::{TagValue, TaggedSheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    Arrange,
    Act,
    Assert,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::Arrange => 'a',
            Symbol::Act => 'c',
            Symbol::Assert => 's',
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayoutEncoding {
    pub symbols: Vec<Symbol>,
    /// Sheet row index behind each symbol, parallel to `symbols`.
    pub rows: Vec<usize>,
    /// Teardown/unknown rows dropped before matching.
    pub omitted_rows: Vec<usize>,
    /// Symbol positions where a raw assert before the first act was
    /// re-mapped to arrange (assert-precondition idiom).
    pub precondition_remap: Vec<usize>,
}

impl LayoutEncoding {
    pub fn layout_string(&self) -> String {
        self.symbols.iter().map(|s| s.as_char()).collect()
    }
}

fn encode_rows(ts: &TaggedSheet, body_only: bool) -> LayoutEncoding {
    let mut symbols = Vec::new();
    let mut rows = Vec::new();
    let mut omitted_rows = Vec::new();
    for (i, (row, tag)) in ts.sheet.rows.iter().zip(&ts.tags).enumerate() {
        if body_only && row.section != Section::Body {
            continue;
        }
        match tag.value {
            TagValue::Arrange => {
                symbols.push(Symbol::Arrange);
                rows.push(i);
            }
            TagValue::Act => {
                symbols.push(Symbol::Act);
                rows.push(i);
            }
            TagValue::Assert => {
                symbols.push(Symbol::Assert);
                rows.push(i);
            }
            TagValue::Teardown | TagValue::Unknown => omitted_rows.push(i),
        }
    }
    let mut precondition_remap = Vec::new();
    if let Some(first_act) = symbols.iter().position(|s| *s == Symbol::Act) {
        for (i, s) in symbols.iter_mut().enumerate().take(first_act) {
            if *s == Symbol::Assert {
                *s = Symbol::Arrange;
                precondition_remap.push(i);
            }
        }
    }
    LayoutEncoding {
        symbols,
        rows,
        omitted_rows,
        precondition_remap,
    }
}

/// Body rows in order, teardown/unknown dropped, pre-first-act asserts
/// re-mapped to arrange.
pub fn encode(ts: &TaggedSheet) -> LayoutEncoding {
    encode_rows(ts, true)
}

/// Like `encode` but with prologue and epilogue rows included, for the
/// Shared Before/After rule.
pub fn encode_with_lifecycle(ts: &TaggedSheet) -> LayoutEncoding {
    encode_rows(ts, false)
}

/// True iff the sequence is exactly a⁺c⁺s⁺.
pub fn match_classic(symbols: &[Symbol]) -> bool {
    let mut i = 0;
    let start = i;
    while i < symbols.len() && symbols[i] == Symbol::Arrange {
        i += 1;
    }
    if i == start {
        return false;
    }
    let start = i;
    while i < symbols.len() && symbols[i] == Symbol::Act {
        i += 1;
    }
    if i == start {
        return false;
    }
    let start = i;
    while i < symbols.len() && symbols[i] == Symbol::Assert {
        i += 1;
    }
    i > start && i == symbols.len()
}

/// Number of non-overlapping, left-to-right maximal a\*c⁺s⁺ matches that
/// jointly cover the sequence; 0 when any suffix stays uncovered.
pub fn count_aaa_blocks(symbols: &[Symbol]) -> usize {
    let mut blocks = 0;
    let mut i = 0;
    while i < symbols.len() {
        while i < symbols.len() && symbols[i] == Symbol::Arrange {
            i += 1;
        }
        let acts = i;
        while i < symbols.len() && symbols[i] == Symbol::Act {
            i += 1;
        }
        if i == acts {
            return 0;
        }
        let asserts = i;
        while i < symbols.len() && symbols[i] == Symbol::Assert {
            i += 1;
        }
        if i == asserts {
            return 0;
        }
        blocks += 1;
    }
    blocks
}

/// Start positions (symbol indices) of each block found by the cover.
pub fn block_boundaries(symbols: &[Symbol]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < symbols.len() {
        out.push(i);
        while i < symbols.len() && symbols[i] == Symbol::Arrange {
            i += 1;
        }
        let acts = i;
        while i < symbols.len() && symbols[i] == Symbol::Act {
            i += 1;
        }
        if i == acts {
            return Vec::new();
        }
        let asserts = i;
        while i < symbols.len() && symbols[i] == Symbol::Assert {
            i += 1;
        }
        if i == asserts {
            return Vec::new();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpecialKind {
    NoArrangeStaticConstructor,
    SharedBeforeAfter,
    ExpectedException,
    ImplicitAct,
}

impl fmt::Display for SpecialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpecialKind::NoArrangeStaticConstructor => "NoArrangeStaticConstructor",
            SpecialKind::SharedBeforeAfter => "SharedBeforeAfter",
            SpecialKind::ExpectedException => "ExpectedException",
            SpecialKind::ImplicitAct => "ImplicitAct",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ClassicAAA,
    SpecialAAA,
    AntiAAA,
    NonUnitTest,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::ClassicAAA => "ClassicAAA",
            Verdict::SpecialAAA => "SpecialAAA",
            Verdict::AntiAAA => "AntiAAA",
            Verdict::NonUnitTest => "NonUnitTest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub special_kind: Option<SpecialKind>,
    pub blocks: usize,
    pub encoding: LayoutEncoding,
    /// (rule, sheet row indices) pairs backing the verdict.
    pub evidence: Vec<(String, Vec<usize>)>,
}

fn uses_assert_throws(ts: &TaggedSheet) -> bool {
    ts.sheet.rows.iter().any(|r| {
        r.statement
            .body_callees()
            .iter()
            .any(|c| c.name == "assertThrows")
    })
}

fn matches_pattern(symbols: &[Symbol], pattern: &str) -> bool {
    // tiny matcher for the fixed patterns "c+s+", "a+s+", "a*c+s*"
    let mut i = 0;
    let mut chars = pattern.chars().peekable();
    while let Some(sym) = chars.next() {
        let quant = chars.next().unwrap_or('1');
        let want = match sym {
            'a' => Symbol::Arrange,
            'c' => Symbol::Act,
            's' => Symbol::Assert,
            _ => unreachable!("pattern alphabet"),
        };
        let start = i;
        while i < symbols.len() && symbols[i] == want {
            i += 1;
        }
        if quant == '+' && i == start {
            return false;
        }
    }
    i == symbols.len()
}

/// Identifier argument of an assert, when it is a plain variable name.
fn identifier_arg(arg: &str) -> Option<&str> {
    let arg = arg.trim();
    if !arg.is_empty()
        && arg.chars().next().map_or(false, |c| c.is_ascii_lowercase() || c == '_')
        && arg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        Some(arg)
    } else {
        None
    }
}

/// First special rule that fires, in the fixed order: ExpectedException,
/// SharedBeforeAfter, NoArrangeStaticConstructor, ImplicitAct.
pub fn detect_special(
    t: &TestCaseModel,
    _c: &TestClassModel,
    ts: &TaggedSheet,
    e: &LayoutEncoding,
    project_types: &BTreeSet<String>,
) -> Option<SpecialKind> {
    // (1) declared exception expectation stands in for the assert
    if (t.expected_exception().is_some() || uses_assert_throws(ts))
        && matches_pattern(&e.symbols, "a*c+s*")
    {
        return Some(SpecialKind::ExpectedException);
    }

    // (2) arrange/assert supplied by @Before/@After methods
    let full = encode_with_lifecycle(ts);
    if full.symbols != e.symbols && match_classic(&full.symbols) {
        return Some(SpecialKind::SharedBeforeAfter);
    }

    // (3) static/constructor target needs no arrangement
    if matches_pattern(&e.symbols, "c+s+") {
        let acts_static = e
            .symbols
            .iter()
            .zip(&e.rows)
            .filter(|(s, _)| **s == Symbol::Act)
            .all(|(_, row)| {
                ts.sheet.rows[*row]
                    .statement
                    .body_callees()
                    .iter()
                    .any(|c| c.constructor || c.static_guess)
            });
        if acts_static {
            return Some(SpecialKind::NoArrangeStaticConstructor);
        }
    }

    // (4) equality under test: assert drives the act through dynamic binding
    if matches_pattern(&e.symbols, "a+s+") {
        let implicit = e
            .symbols
            .iter()
            .zip(&e.rows)
            .filter(|(s, _)| **s == Symbol::Assert)
            .any(|(_, row)| {
                ts.sheet.rows[*row].statement.body_callees().iter().any(|c| {
                    let types: Vec<&String> = c
                        .args
                        .iter()
                        .filter_map(|a| identifier_arg(a))
                        .filter_map(|name| t.var_types.get(name))
                        .collect();
                    types.len() >= 2
                        && types.windows(2).all(|w| w[0] == w[1])
                        && project_types.contains(types[0].as_str())
                })
            });
        if implicit {
            return Some(SpecialKind::ImplicitAct);
        }
    }
    None
}

/// Final verdict for one test case.
pub fn classify(
    t: &TestCaseModel,
    c: &TestClassModel,
    ts: &TaggedSheet,
    project_types: &BTreeSet<String>,
    cfg: &RuleConfig,
) -> Classification {
    let e = encode(ts);
    let blocks = count_aaa_blocks(&e.symbols);
    if !cfg.include_it {
        if let Some(reason) = is_probable_non_unit_test(t, c, cfg) {
            return Classification {
                verdict: Verdict::NonUnitTest,
                special_kind: None,
                blocks,
                encoding: e,
                evidence: vec![(format!("non-unit-test: {reason}"), Vec::new())],
            };
        }
    }
    if match_classic(&e.symbols) {
        let evidence = vec![("classic-layout".to_string(), e.rows.clone())];
        return Classification {
            verdict: Verdict::ClassicAAA,
            special_kind: None,
            blocks,
            encoding: e,
            evidence,
        };
    }
    if let Some(kind) = detect_special(t, c, ts, &e, project_types) {
        let evidence = vec![(format!("special: {kind}"), e.rows.clone())];
        return Classification {
            verdict: Verdict::SpecialAAA,
            special_kind: Some(kind),
            blocks,
            encoding: e,
            evidence,
        };
    }
    let evidence = vec![("classic-layout-failed".to_string(), e.rows.clone())];
    Classification {
        verdict: Verdict::AntiAAA,
        special_kind: None,
        blocks,
        encoding: e,
        evidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_model::parse_file;
    use crate::tag_sheet::{attach_lifecycle, expand};
    use crate::tagger::tag_sheet;
    use std::path::Path;

    fn cfg() -> RuleConfig {
        RuleConfig::default()
    }

    fn analyze(src: &str, test: &str) -> (TestCaseModel, TestClassModel, TaggedSheet) {
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
        let tagged = tag_sheet(sheet, &cfg());
        (t, class, tagged)
    }

    fn classify_src(src: &str, test: &str, types: &[&str]) -> Classification {
        let (t, class, tagged) = analyze(src, test);
        let project_types: BTreeSet<String> = types.iter().map(|s| s.to_string()).collect();
        classify(&t, &class, &tagged, &project_types, &cfg())
    }

    fn syms(s: &str) -> Vec<Symbol> {
        s.chars()
            .map(|c| match c {
                'a' => Symbol::Arrange,
                'c' => Symbol::Act,
                's' => Symbol::Assert,
                _ => panic!("bad symbol"),
            })
            .collect()
    }

    // independent NFA simulation of a+c+s+ for cross-checking
    fn classic_oracle(symbols: &[Symbol]) -> bool {
        let mut states = vec![0u8];
        for sym in symbols {
            let mut next = Vec::new();
            for st in states {
                match (st, sym) {
                    (0, Symbol::Arrange) | (1, Symbol::Arrange) => next.push(1),
                    (1, Symbol::Act) | (2, Symbol::Act) => next.push(2),
                    (2, Symbol::Assert) | (3, Symbol::Assert) => next.push(3),
                    _ => {}
                }
            }
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            states = next;
        }
        states.contains(&3)
    }

    // DP cover oracle: minimal number of a*c+s+ blocks covering the suffix
    fn blocks_oracle(symbols: &[Symbol]) -> usize {
        let n = symbols.len();
        let seg_ok = |i: usize, j: usize| -> bool {
            let mut k = i;
            while k < j && symbols[k] == Symbol::Arrange {
                k += 1;
            }
            let c0 = k;
            while k < j && symbols[k] == Symbol::Act {
                k += 1;
            }
            if k == c0 {
                return false;
            }
            let s0 = k;
            while k < j && symbols[k] == Symbol::Assert {
                k += 1;
            }
            k > s0 && k == j
        };
        let mut best = vec![usize::MAX; n + 1];
        best[n] = 0;
        for i in (0..n).rev() {
            for j in i + 1..=n {
                if best[j] != usize::MAX && seg_ok(i, j) {
                    best[i] = best[i].min(1 + best[j]);
                }
            }
        }
        if best[0] == usize::MAX {
            0
        } else {
            best[0]
        }
    }

    #[test]
    fn classic_examples() {
        assert!(match_classic(&syms("aacs")));
        assert!(match_classic(&syms("acs")));
        assert!(!match_classic(&syms("cs")));
        assert!(!match_classic(&syms("acsacs")));
        assert!(!match_classic(&syms("")));
        assert!(!match_classic(&syms("ac")));
    }

    #[test]
    fn block_count_examples() {
        assert_eq!(count_aaa_blocks(&syms("aacsacs")), 2);
        assert_eq!(count_aaa_blocks(&syms("acs")), 1);
        assert_eq!(count_aaa_blocks(&syms("cs")), 1);
        assert_eq!(count_aaa_blocks(&syms("as")), 0);
        assert_eq!(count_aaa_blocks(&syms("acsc")), 0);
        assert_eq!(count_aaa_blocks(&syms("")), 0);
        assert_eq!(block_boundaries(&syms("aacsacs")), vec![0, 4]);
    }

    #[test]
    fn matchers_agree_with_oracles_exhaustively() {
        let alphabet = [Symbol::Arrange, Symbol::Act, Symbol::Assert];
        for len in 0..=8usize {
            let mut idx = vec![0usize; len];
            loop {
                let seq: Vec<Symbol> = idx.iter().map(|&i| alphabet[i]).collect();
                assert_eq!(match_classic(&seq), classic_oracle(&seq), "{seq:?}");
                assert_eq!(count_aaa_blocks(&seq), blocks_oracle(&seq), "{seq:?}");
                let mut k = 0;
                loop {
                    if k == len {
                        break;
                    }
                    idx[k] += 1;
                    if idx[k] < 3 {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == len {
                    break;
                }
            }
        }
    }

    #[test]
    fn classic_iff_one_block_starting_with_arrange() {
        let alphabet = [Symbol::Arrange, Symbol::Act, Symbol::Assert];
        for len in 1..=7usize {
            let mut idx = vec![0usize; len];
            loop {
                let seq: Vec<Symbol> = idx.iter().map(|&i| alphabet[i]).collect();
                let lhs = match_classic(&seq);
                let rhs = count_aaa_blocks(&seq) == 1 && seq[0] == Symbol::Arrange;
                assert_eq!(lhs, rhs, "{seq:?}");
                let mut k = 0;
                loop {
                    if k == len {
                        break;
                    }
                    idx[k] += 1;
                    if idx[k] < 3 {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == len {
                    break;
                }
            }
        }
    }

    const DROP_SRC: &str = r#"
public class ConfigTest {
    @Test
    public void testGetByPrefix_Drop(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);}
}
"#;

    #[test]
    fn classic_listing_classifies_classic() {
        let cls = classify_src(DROP_SRC, "testGetByPrefix_Drop", &[]);
        assert_eq!(cls.verdict, Verdict::ClassicAAA);
        assert_eq!(cls.blocks, 1);
        assert_eq!(cls.encoding.layout_string(), "aacs");
        assert!(cls.encoding.precondition_remap.is_empty());
    }

    #[test]
    fn two_scenario_listing_is_anti_with_two_blocks() {
        let src = r#"
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
        let cls = classify_src(src, "testGetByPrefix", &[]);
        assert_eq!(cls.verdict, Verdict::AntiAAA);
        assert_eq!(cls.blocks, 2);
        assert_eq!(cls.encoding.layout_string(), "aacsacs");
    }

    #[test]
    fn static_listing_is_special_no_arrange() {
        let src = r#"
public class StaticTest {
    @Test
    public void testStatic() {
        int a = SomeClass.aStaticMethod();
        assertEquals(1,a);}
}
"#;
        let cls = classify_src(src, "testStatic", &[]);
        assert_eq!(cls.verdict, Verdict::SpecialAAA);
        assert_eq!(
            cls.special_kind,
            Some(SpecialKind::NoArrangeStaticConstructor)
        );
    }

    #[test]
    fn shared_before_after_listing() {
        let src = r#"
public class DataTest {
    @Before
    public void setup(){
        data = new Data(src, dest);}
    @After
    public void verify(){
        assertNotNull(data.getValue());}
    @Test
    public void testConfigBig(){
        data.config("Big");}
}
"#;
        let cls = classify_src(src, "testConfigBig", &[]);
        assert_eq!(cls.verdict, Verdict::SpecialAAA);
        assert_eq!(cls.special_kind, Some(SpecialKind::SharedBeforeAfter));
    }

    #[test]
    fn expected_exception_listing() {
        let src = r#"
public class ClientTest {
    @Test(expected = ClientException.class)
    public void testEmptyClientException() throws Exception {
        try(Client client = new Client("")){
            client.createProfile();}}
}
"#;
        let cls = classify_src(src, "testEmptyClientException", &["Client"]);
        assert_eq!(cls.verdict, Verdict::SpecialAAA);
        assert_eq!(cls.special_kind, Some(SpecialKind::ExpectedException));
    }

    #[test]
    fn implicit_act_listing_requires_project_type() {
        let src = r#"
public class ClientTest {
    @Test
    public void testEquals() throws Exception {
        Client a = new Client("Bob");
        Client b = new Client("Bob");
        assertEquals(a, b);}
}
"#;
        let cls = classify_src(src, "testEquals", &["Client"]);
        assert_eq!(cls.verdict, Verdict::SpecialAAA);
        assert_eq!(cls.special_kind, Some(SpecialKind::ImplicitAct));

        // equals over a foreign type gets no special treatment
        let cls = classify_src(src, "testEquals", &[]);
        assert_eq!(cls.verdict, Verdict::AntiAAA);
    }

    #[test]
    fn precondition_assert_is_remapped_and_still_classic() {
        let src = r#"
public class PollTest {
    @Test
    public void testPoll(){
       Snapshot s = sqlMng.createSnapshot();
       assertNotNull(s);
       String v = s.poll();
       assertEquals("8/22/2022",v);}
}
"#;
        let cls = classify_src(src, "testPoll", &[]);
        assert_eq!(cls.verdict, Verdict::ClassicAAA);
        assert_eq!(cls.encoding.precondition_remap.len(), 1);
        assert_eq!(cls.encoding.layout_string(), "aacs");
    }

    #[test]
    fn it_class_is_non_unit_test() {
        let src = r#"
public class IngestIT {
    @Test public void testFlow(){ pipeline.run(); assertTrue(ok); }
}
"#;
        let cls = classify_src(src, "testFlow", &[]);
        assert_eq!(cls.verdict, Verdict::NonUnitTest);
    }

    #[test]
    fn empty_encoding_is_anti_with_zero_blocks() {
        let e = LayoutEncoding {
            symbols: Vec::new(),
            rows: Vec::new(),
            omitted_rows: vec![0, 1],
            precondition_remap: Vec::new(),
        };
        assert!(!match_classic(&e.symbols));
        assert_eq!(count_aaa_blocks(&e.symbols), 0);
    }

    #[test]
    fn remap_indices_precede_first_act() {
        let src = r#"
public class PollTest {
    @Test
    public void testPoll(){
       Snapshot s = sqlMng.createSnapshot();
       assertNotNull(s);
       String v = s.poll();
       assertEquals("x",v);}
}
"#;
        let (_, _, tagged) = analyze(src, "testPoll");
        let e = encode(&tagged);
        let first_act = e.symbols.iter().position(|s| *s == Symbol::Act).unwrap();
        assert!(e.precondition_remap.iter().all(|i| *i < first_act));
    }
}
