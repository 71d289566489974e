//! Treebank normalization.
//!
//! Stages, applied in this order by [`normalize_pipeline`]:
//!
//! 1. apostrophe-like codepoints in forms and lemmas become U+02BC
//! 2. coordination suffixes such as `_CO` and `_AP` are stripped from relations
//! 3. fused conjunctions listed in the split lexicon are tokenized
//! 4. cycles are broken (and, optionally, extra root children merged)
//! 5. elliptical tokens move to the end of the sentence as `[0]`, `[1]`, ...
//!
//! Every stage is a pure function of the sentence and the configuration, and
//! the composition is idempotent.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{find_cycle, is_placeholder_form, Sentence, Token, TAG_LEN};

/// MODIFIER LETTER APOSTROPHE, the canonical apostrophe.
pub const CANONICAL_APOSTROPHE: char = '\u{02BC}';

pub const DEFAULT_APOSTROPHE_SOURCES: [char; 6] = [
    '\u{0027}', // APOSTROPHE
    '\u{2019}', // RIGHT SINGLE QUOTATION MARK
    '\u{1FBD}', // GREEK KORONIS
    '\u{1FBF}', // GREEK PSILI
    '\u{0315}', // COMBINING COMMA ABOVE RIGHT
    '\u{A78C}', // LATIN SMALL LETTER SALTILLO
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("split template for {form:?}: component {component} has head {head}, outside 1..={len}")]
    TemplateHeadOutOfRange {
        form: String,
        component: usize,
        head: usize,
        len: usize,
    },
    #[error("invalid normalization config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CycleRepair {
    /// The smallest-id token on each cycle is attached to the root.
    #[default]
    ReattachToRoot,
}

/// One output token of a fused-form split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitComponent {
    pub form: String,
    /// Defaults to the component form.
    #[serde(default)]
    pub lemma: Option<String>,
    #[serde(default = "unset_tag")]
    pub postag: String,
    /// Relation for components after the first; the first inherits the
    /// relation of the fused token.
    #[serde(default)]
    pub relation: Option<String>,
    /// 1-based index of the component this one attaches to. Ignored for the
    /// first component, which inherits the fused token's head.
    #[serde(default)]
    pub head: Option<usize>,
}

fn unset_tag() -> String {
    "-".repeat(TAG_LEN)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationConfig {
    /// Codepoints rewritten to U+02BC. Given in TOML either as the literal
    /// character or as `U+XXXX`.
    #[serde(with = "codepoints")]
    pub apostrophe_sources: BTreeSet<char>,
    pub suffixes_to_strip: Vec<String>,
    pub split_lexicon: BTreeMap<String, Vec<SplitComponent>>,
    #[serde(default)]
    pub cycle_repair: CycleRepair,
    pub single_root_enforce: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        let comp = |form: &str, postag: &str, relation: Option<&str>, head: Option<usize>| SplitComponent {
            form: form.to_string(),
            lemma: None,
            postag: postag.to_string(),
            relation: relation.map(str::to_string),
            head,
        };
        let mut split_lexicon = BTreeMap::new();
        for (fused, first, second) in [("οὐδέ", "οὐ", "δέ"), ("οὐδὲ", "οὐ", "δὲ"), ("εἴτε", "εἴ", "τε")]
        {
            let first_tag = if first == "οὐ" { "d--------" } else { "c--------" };
            split_lexicon.insert(
                fused.to_string(),
                vec![
                    comp(first, first_tag, None, None),
                    comp(second, "c--------", Some("AuxY"), Some(1)),
                ],
            );
        }
        NormalizationConfig {
            apostrophe_sources: DEFAULT_APOSTROPHE_SOURCES.into_iter().collect(),
            suffixes_to_strip: vec!["_CO".to_string(), "_AP".to_string()],
            split_lexicon,
            cycle_repair: CycleRepair::ReattachToRoot,
            single_root_enforce: true,
        }
    }
}

impl NormalizationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, NormalizeError> {
        let cfg: NormalizationConfig = toml::from_str(text).map_err(|e| NormalizeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the invariants the pipeline's idempotence depends on.
    pub fn validate(&self) -> Result<(), NormalizeError> {
        let err = |m: String| Err(NormalizeError::Config(m));
        if self.apostrophe_sources.contains(&CANONICAL_APOSTROPHE) {
            return err("apostrophe_sources must not contain U+02BC".to_string());
        }
        for s in &self.suffixes_to_strip {
            if !s.starts_with('_') || s.len() < 2 {
                return err(format!("suffix {s:?} must start with '_' and be non-empty"));
            }
        }
        for (fused, comps) in &self.split_lexicon {
            if comps.len() < 2 {
                return err(format!("split entry {fused:?} needs at least two components"));
            }
            check_template(fused, comps)?;
            for c in comps {
                let lemma = c.lemma.as_deref().unwrap_or(&c.form);
                if c.form.is_empty() {
                    return err(format!("split entry {fused:?} has an empty component form"));
                }
                if self.split_lexicon.contains_key(&c.form) {
                    return err(format!("component {:?} of {fused:?} is itself a lexicon entry", c.form));
                }
                if c.form
                    .chars()
                    .chain(lemma.chars())
                    .any(|ch| self.apostrophe_sources.contains(&ch))
                {
                    return err(format!(
                        "component {:?} of {fused:?} contains an apostrophe source",
                        c.form
                    ));
                }
                if c.postag.chars().count() != TAG_LEN {
                    return err(format!("component {:?} of {fused:?} has a malformed postag", c.form));
                }
            }
        }
        Ok(())
    }
}

/// Component heads must lie within the group and hang off component 1.
fn check_template(fused: &str, comps: &[SplitComponent]) -> Result<(), NormalizeError> {
    let len = comps.len();
    let mut heads = vec![0usize; len];
    for (k, c) in comps.iter().enumerate().skip(1) {
        let head = c.head.unwrap_or(0);
        if head == 0 || head > len || head == k + 1 {
            return Err(NormalizeError::TemplateHeadOutOfRange {
                form: fused.to_string(),
                component: k + 1,
                head,
                len,
            });
        }
        heads[k] = head;
    }
    if find_cycle(&heads).is_some() {
        return Err(NormalizeError::Config(format!(
            "split template for {fused:?} is cyclic"
        )));
    }
    Ok(())
}

mod codepoints {
    use std::collections::BTreeSet;

    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(set: &BTreeSet<char>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(set.iter().map(|c| format!("U+{:04X}", *c as u32)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<char>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.into_iter()
            .map(|s| {
                let mut chars = s.chars();
                if let (Some(c), None) = (chars.next(), chars.next()) {
                    return Ok(c);
                }
                s.strip_prefix("U+")
                    .and_then(|hex| u32::from_str_radix(hex, 16).ok())
                    .and_then(char::from_u32)
                    .ok_or_else(|| D::Error::custom(format!("not a codepoint: {s:?}")))
            })
            .collect()
    }
}

/// Per-stage change counts. Reports from different sentences add up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NormalizationReport {
    pub apostrophes_changed: usize,
    pub suffixes_stripped: usize,
    pub tokens_split: usize,
    pub ellipses_relocated: usize,
    pub cycles_repaired: usize,
    /// Extra root children attached under the kept root.
    pub roots_merged: usize,
}

impl NormalizationReport {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    /// `key=value` lines in field order.
    pub fn render(&self) -> String {
        format!(
            "apostrophes_changed={}\nsuffixes_stripped={}\ntokens_split={}\nellipses_relocated={}\ncycles_repaired={}\nroots_merged={}\n",
            self.apostrophes_changed,
            self.suffixes_stripped,
            self.tokens_split,
            self.ellipses_relocated,
            self.cycles_repaired,
            self.roots_merged
        )
    }
}

impl AddAssign for NormalizationReport {
    fn add_assign(&mut self, o: Self) {
        self.apostrophes_changed += o.apostrophes_changed;
        self.suffixes_stripped += o.suffixes_stripped;
        self.tokens_split += o.tokens_split;
        self.ellipses_relocated += o.ellipses_relocated;
        self.cycles_repaired += o.cycles_repaired;
        self.roots_merged += o.roots_merged;
    }
}

impl Add for NormalizationReport {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl std::iter::Sum for NormalizationReport {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Replaces every source codepoint with U+02BC; returns the replacement count.
pub fn canonicalize_apostrophes(text: &str, sources: &BTreeSet<char>) -> (String, usize) {
    let mut count = 0;
    let out = text
        .chars()
        .map(|c| {
            if sources.contains(&c) {
                count += 1;
                CANONICAL_APOSTROPHE
            } else {
                c
            }
        })
        .collect();
    (out, count)
}

pub fn normalize_apostrophes(sentence: &Sentence, config: &NormalizationConfig) -> (Sentence, usize) {
    let mut out = sentence.clone();
    let mut count = 0;
    for t in &mut out.tokens {
        let (form, a) = canonicalize_apostrophes(&t.form, &config.apostrophe_sources);
        let (lemma, b) = canonicalize_apostrophes(&t.lemma, &config.apostrophe_sources);
        t.form = form;
        t.lemma = lemma;
        count += a + b;
    }
    (out, count)
}

/// Strips configured suffixes from a relation, longest match first, until
/// none matches. A label is never reduced to the empty string.
pub fn strip_suffixes<'a>(relation: &'a str, suffixes: &[String]) -> &'a str {
    let mut rel = relation;
    loop {
        let best = suffixes
            .iter()
            .filter(|s| rel.len() > s.len() && rel.ends_with(s.as_str()))
            .max_by_key(|s| s.len());
        match best {
            Some(s) => rel = &rel[..rel.len() - s.len()],
            None => return rel,
        }
    }
}

/// Returns the sentence and the number of tokens whose relation changed.
pub fn strip_label_suffixes(sentence: &Sentence, config: &NormalizationConfig) -> (Sentence, usize) {
    let mut out = sentence.clone();
    let mut count = 0;
    for t in &mut out.tokens {
        let stripped = strip_suffixes(&t.relation, &config.suffixes_to_strip);
        if stripped.len() != t.relation.len() {
            t.relation = stripped.to_string();
            count += 1;
        }
    }
    (out, count)
}

/// Replaces lexicon forms by their components, renumbering ids and heads.
/// Returns the number of tokens that were split.
pub fn split_fused_conjunctions(
    sentence: &Sentence,
    config: &NormalizationConfig,
) -> Result<(Sentence, usize), NormalizeError> {
    let entries: Vec<Option<&Vec<SplitComponent>>> = sentence
        .tokens
        .iter()
        .map(|t| {
            if t.elliptical {
                None
            } else {
                config.split_lexicon.get(&t.form)
            }
        })
        .collect();
    if entries.iter().all(Option::is_none) {
        return Ok((sentence.clone(), 0));
    }

    // new id of each old token (its first component when split)
    let mut new_id = vec![0usize; sentence.len() + 1];
    let mut next = 1;
    for (i, e) in entries.iter().enumerate() {
        new_id[i + 1] = next;
        next += e.map_or(1, |c| c.len());
    }

    let mut tokens = Vec::with_capacity(next - 1);
    let mut count = 0;
    for (t, e) in sentence.tokens.iter().zip(&entries) {
        let head = new_id[t.head];
        match e {
            None => tokens.push(Token {
                id: new_id[t.id],
                head,
                ..t.clone()
            }),
            Some(comps) => {
                check_template(&t.form, comps)?;
                count += 1;
                let base = new_id[t.id];
                for (k, c) in comps.iter().enumerate() {
                    let (head, relation) = if k == 0 {
                        (head, t.relation.clone())
                    } else {
                        let h = c.head.expect("checked template");
                        (base + h - 1, c.relation.clone().unwrap_or_else(|| t.relation.clone()))
                    };
                    tokens.push(Token {
                        id: base + k,
                        form: c.form.clone(),
                        lemma: c.lemma.clone().unwrap_or_else(|| c.form.clone()),
                        postag: c.postag.clone(),
                        head,
                        relation,
                        elliptical: false,
                    });
                }
            }
        }
    }
    Ok((
        Sentence {
            tokens,
            ..sentence.clone()
        },
        count,
    ))
}

/// Moves elliptical tokens, in order, to the end of the sentence and names
/// them `[0]`, `[1]`, ... Heads are remapped. Returns the number of
/// elliptical tokens whose position or form changed.
pub fn relocate_ellipsis(sentence: &Sentence) -> (Sentence, usize) {
    let n = sentence.len();
    let (regular, elliptic): (Vec<&Token>, Vec<&Token>) = sentence.tokens.iter().partition(|t| !t.elliptical);
    if elliptic.is_empty() {
        return (sentence.clone(), 0);
    }
    let mut new_id = vec![0usize; n + 1];
    for (i, t) in regular.iter().chain(&elliptic).enumerate() {
        new_id[t.id] = i + 1;
    }
    let mut changed = 0;
    let mut tokens: Vec<Token> = regular
        .iter()
        .map(|t| Token {
            id: new_id[t.id],
            head: new_id[t.head],
            ..(*t).clone()
        })
        .collect();
    for (k, t) in elliptic.iter().enumerate() {
        let form = format!("[{k}]");
        if new_id[t.id] != t.id || t.form != form {
            changed += 1;
        }
        tokens.push(Token {
            id: new_id[t.id],
            head: new_id[t.head],
            form,
            ..(*t).clone()
        });
    }
    (
        Sentence {
            tokens,
            ..sentence.clone()
        },
        changed,
    )
}

/// Breaks cycles by attaching the smallest-id member of each to the root,
/// until the head graph is a tree. Returns the number of reattachments.
pub fn repair_cycles(sentence: &Sentence, config: &NormalizationConfig) -> (Sentence, usize) {
    let mut out = sentence.clone();
    let mut heads = out.heads();
    let mut repaired = 0;
    match config.cycle_repair {
        CycleRepair::ReattachToRoot => {
            while let Some(cycle) = find_cycle(&heads) {
                heads[cycle[0] - 1] = 0;
                repaired += 1;
            }
        }
    }
    for (t, h) in out.tokens.iter_mut().zip(heads) {
        t.head = h;
    }
    (out, repaired)
}

/// Keeps one root child and attaches the others under it. The kept root is
/// the smallest id among `preferred` still attached to the root, falling
/// back to the smallest root child overall. Returns the number of tokens
/// moved.
pub fn enforce_single_root(sentence: &Sentence, preferred: &[usize]) -> (Sentence, usize) {
    let roots = sentence.root_children();
    if roots.len() <= 1 {
        return (sentence.clone(), 0);
    }
    let keep = roots
        .iter()
        .copied()
        .find(|r| preferred.contains(r))
        .unwrap_or(roots[0]);
    let mut out = sentence.clone();
    let mut moved = 0;
    for t in &mut out.tokens {
        if t.head == 0 && t.id != keep {
            t.head = keep;
            moved += 1;
        }
    }
    (out, moved)
}

/// Runs all stages in order and reports what changed.
pub fn normalize_pipeline(
    sentence: &Sentence,
    config: &NormalizationConfig,
) -> Result<(Sentence, NormalizationReport), NormalizeError> {
    let mut report = NormalizationReport::default();
    let (s, n) = normalize_apostrophes(sentence, config);
    report.apostrophes_changed = n;
    let (s, n) = strip_label_suffixes(&s, config);
    report.suffixes_stripped = n;
    let (s, n) = split_fused_conjunctions(&s, config)?;
    report.tokens_split = n;
    let original_roots = s.root_children();
    let (mut s, n) = repair_cycles(&s, config);
    report.cycles_repaired = n;
    if config.single_root_enforce {
        let (merged, n) = enforce_single_root(&s, &original_roots);
        s = merged;
        report.roots_merged = n;
    }
    let (s, n) = relocate_ellipsis(&s);
    report.ellipses_relocated = n;
    Ok((s, report))
}

/// Normalizes a corpus; the report is the sum of per-sentence reports.
pub fn normalize_corpus(
    sentences: &[Sentence],
    config: &NormalizationConfig,
) -> Result<(Vec<Sentence>, NormalizationReport), NormalizeError> {
    let mut report = NormalizationReport::default();
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let (t, r) = normalize_pipeline(s, config)?;
        report += r;
        out.push(t);
    }
    Ok((out, report))
}

/// True if the form looks like an already-normalized elliptical placeholder.
pub fn is_normalized_placeholder(token: &Token) -> bool {
    token.elliptical && is_placeholder_form(&token.form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::fixtures::{sentence, token};
    use crate::treebank::validate_tree;

    fn cfg() -> NormalizationConfig {
        NormalizationConfig::default()
    }

    fn with_forms(forms: &[&str], heads: &[usize]) -> Sentence {
        let mut s = sentence(heads);
        for (t, f) in s.tokens.iter_mut().zip(forms) {
            t.form = f.to_string();
            t.lemma = f.to_string();
        }
        s
    }

    #[test]
    fn apostrophe_becomes_modifier_letter() {
        let s = with_forms(&["δ\u{2019}"], &[0]);
        let (out, n) = normalize_apostrophes(&s, &cfg());
        assert_eq!(out.tokens[0].form, "δ\u{02BC}");
        // lemma carried the same apostrophe
        assert_eq!(n, 2);

        let mut s = with_forms(&["δ\u{2019}"], &[0]);
        s.tokens[0].lemma = "δέ".to_string();
        assert_eq!(normalize_apostrophes(&s, &cfg()).1, 1);
    }

    #[test]
    fn apostrophe_free_forms_are_unchanged() {
        let s = with_forms(&["λόγος"], &[0]);
        let (out, n) = normalize_apostrophes(&s, &cfg());
        assert_eq!((out, n), (s, 0));
    }

    #[test]
    fn only_non_canonical_apostrophes_count() {
        let mut s = with_forms(&["δ'\u{02BC}"], &[0]);
        s.tokens[0].lemma = "δέ".to_string();
        let (out, n) = normalize_apostrophes(&s, &cfg());
        assert_eq!(out.tokens[0].form, "δ\u{02BC}\u{02BC}");
        assert_eq!(n, 1);
    }

    #[test]
    fn coordination_suffixes() {
        let sfx = cfg().suffixes_to_strip;
        assert_eq!(strip_suffixes("ATR_CO", &sfx), "ATR");
        assert_eq!(strip_suffixes("PRED", &sfx), "PRED");
        assert_eq!(strip_suffixes("APOS_AP_CO", &sfx), "APOS");
        assert_eq!(strip_suffixes("_CO", &sfx), "_CO");
        let longest = vec!["_CO".to_string(), "_AP_CO".to_string()];
        assert_eq!(strip_suffixes("OBJ_X_AP_CO", &longest), "OBJ_X");
    }

    #[test]
    fn strip_counts_changed_tokens() {
        let mut s = sentence(&[2, 0, 2]);
        s.tokens[0].relation = "ATR_CO".to_string();
        s.tokens[1].relation = "PRED".to_string();
        s.tokens[2].relation = "OBJ_AP".to_string();
        let (out, n) = strip_label_suffixes(&s, &cfg());
        assert_eq!(n, 2);
        let rels: Vec<_> = out.tokens.iter().map(|t| t.relation.as_str()).collect();
        assert_eq!(rels, ["ATR", "PRED", "OBJ"]);
    }

    #[test]
    fn fused_conjunction_split() {
        let s = with_forms(&["οὐδέ"], &[0]);
        let (out, n) = split_fused_conjunctions(&s, &cfg()).unwrap();
        assert_eq!(n, 1);
        let forms: Vec<_> = out.tokens.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, ["οὐ", "δέ"]);
        assert_eq!(out.heads(), vec![0, 1]);
        assert_eq!(out.tokens[0].relation, "ATR");
        assert_eq!(out.tokens[1].relation, "AuxY");
        assert!(validate_tree(&out, true).is_ok());
    }

    #[test]
    fn no_lexicon_match_is_identity() {
        let s = with_forms(&["καί", "λόγος"], &[0, 1]);
        assert_eq!(split_fused_conjunctions(&s, &cfg()).unwrap(), (s, 0));
    }

    #[test]
    fn split_reindexes_following_tokens() {
        // token 2 is split; old token 3 becomes 4 and heads follow it
        let s = with_forms(&["ἀλλά", "οὐδέ", "ἔλεγε"], &[3, 3, 0]);
        let (out, _) = split_fused_conjunctions(&s, &cfg()).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.tokens[3].form, "ἔλεγε");
        assert_eq!(out.tokens[3].id, 4);
        assert_eq!(out.heads(), vec![4, 4, 2, 0]);
    }

    #[test]
    fn bad_template_head() {
        let mut c = cfg();
        c.split_lexicon.get_mut("εἴτε").unwrap()[1].head = Some(5);
        let s = with_forms(&["εἴτε"], &[0]);
        assert!(matches!(
            split_fused_conjunctions(&s, &c),
            Err(NormalizeError::TemplateHeadOutOfRange { head: 5, .. })
        ));
        assert!(c.validate().is_err());
    }

    fn elliptic(mut s: Sentence, ids: &[usize]) -> Sentence {
        for &i in ids {
            s.tokens[i - 1].elliptical = true;
            s.tokens[i - 1].form = "ELL".to_string();
        }
        s
    }

    #[test]
    fn ellipsis_moves_to_end() {
        // 1 -> 2, 2 -> 0, 3 -> 2, 4 -> 3, with 2 elliptical
        let s = elliptic(sentence(&[2, 0, 2, 3]), &[2]);
        let (out, n) = relocate_ellipsis(&s);
        assert_eq!(n, 1);
        assert_eq!(out.tokens[3].form, "[0]");
        assert!(out.tokens[3].elliptical);
        assert_eq!(out.heads(), vec![4, 4, 2, 0]);
        let forms: Vec<_> = out.tokens.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, ["w1", "w3", "w4", "[0]"]);
        assert!(validate_tree(&out, true).is_ok());
    }

    #[test]
    fn no_ellipsis_is_identity() {
        let s = sentence(&[2, 0]);
        assert_eq!(relocate_ellipsis(&s), (s, 0));
    }

    #[test]
    fn two_ellipses_keep_relative_order() {
        let s = elliptic(sentence(&[2, 0, 2, 2, 4]), &[1, 3]);
        let (out, n) = relocate_ellipsis(&s);
        assert_eq!(n, 2);
        assert_eq!(out.tokens[3].form, "[0]");
        assert_eq!(out.tokens[4].form, "[1]");
        // old 1 -> 4, old 3 -> 5, old 2 -> 1, old 4 -> 2, old 5 -> 3
        assert_eq!(out.heads(), vec![0, 1, 2, 1, 1]);
        assert_eq!(relocate_ellipsis(&out), (out.clone(), 0));
    }

    #[test]
    fn cycle_repairs() {
        let (out, n) = repair_cycles(&sentence(&[2, 1]), &cfg());
        assert_eq!((out.heads(), n), (vec![0, 1], 1));
        let (out, n) = repair_cycles(&sentence(&[2, 3, 1]), &cfg());
        assert_eq!((out.heads(), n), (vec![0, 3, 1], 1));
        assert!(validate_tree(&out, false).is_ok());
        let tree = sentence(&[2, 0, 2]);
        assert_eq!(repair_cycles(&tree, &cfg()), (tree, 0));
        // two disjoint cycles
        let (out, n) = repair_cycles(&sentence(&[2, 1, 4, 3]), &cfg());
        assert_eq!((out.heads(), n), (vec![0, 1, 0, 3], 2));
    }

    #[test]
    fn single_root_keeps_original_root() {
        let s = sentence(&[3, 0, 0]);
        let (out, n) = enforce_single_root(&s, &[3]);
        assert_eq!((out.heads(), n), (vec![3, 3, 0], 1));
        let (out, _) = enforce_single_root(&s, &[]);
        assert_eq!(out.heads(), vec![3, 0, 2]);
    }

    /// One defect of each kind.
    pub(crate) fn defective() -> Sentence {
        let mut toks = vec![
            token(1, "δ\u{2019}", 3),
            token(2, "οὐδέ", 3),
            token(3, "ἦλθε", 0),
            token(4, "ELL", 5),
            token(5, "ἄγει", 4),
            token(6, "ἵππον", 5),
        ];
        toks[0].lemma = "δέ".to_string();
        toks[1].lemma = "οὐδέ".to_string();
        toks[3].elliptical = true;
        toks[3].relation = "ADV".to_string();
        toks[4].relation = "OBJ_CO".to_string();
        Sentence::new("fx", "doc", toks)
    }

    #[test]
    fn one_defect_of_each_kind() {
        let (out, r) = normalize_pipeline(&defective(), &cfg()).unwrap();
        assert_eq!(
            (
                r.apostrophes_changed,
                r.suffixes_stripped,
                r.tokens_split,
                r.cycles_repaired,
                r.ellipses_relocated
            ),
            (1, 1, 1, 1, 1)
        );
        // the repaired cycle root is merged under the original root
        assert_eq!(r.roots_merged, 1);
        assert_eq!(out.len(), 7);
        assert_eq!(out.tokens[6].form, "[0]");
        assert!(validate_tree(&out, true).is_ok());
        let (again, r2) = normalize_pipeline(&out, &cfg()).unwrap();
        assert_eq!(again, out);
        assert!(r2.is_zero());
    }

    #[test]
    fn corpus_report_is_the_sum() {
        let corpus = vec![defective(), sentence(&[2, 1]), with_forms(&["εἴτε", "x'"], &[0, 1])];
        let (_, total) = normalize_corpus(&corpus, &cfg()).unwrap();
        let sum: NormalizationReport = corpus.iter().map(|s| normalize_pipeline(s, &cfg()).unwrap().1).sum();
        assert_eq!(total, sum);
        assert_eq!(total.tokens_split, 2);
    }

    #[test]
    fn config_toml_round_trip() {
        let c = cfg();
        let text = c.to_toml_string();
        assert_eq!(NormalizationConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn config_from_handwritten_toml() {
        let text = r#"
apostrophe_sources = ["'", "U+2019"]
suffixes_to_strip = ["_CO"]
cycle_repair = "reattach_to_root"
single_root_enforce = false

[split_lexicon]
"μηδέ" = [ { form = "μή", postag = "d--------" }, { form = "δέ", relation = "AuxY", head = 1 } ]
"#;
        let c = NormalizationConfig::from_toml_str(text).unwrap();
        assert_eq!(c.apostrophe_sources.len(), 2);
        assert!(!c.single_root_enforce);
        assert_eq!(c.split_lexicon["μηδέ"][1].postag, "---------");

        let bad = text.replace("\"_CO\"", "\"CO\"");
        assert!(NormalizationConfig::from_toml_str(&bad).is_err());
        let bad = text.replace("\"'\"", "\"U+02BC\"");
        assert!(NormalizationConfig::from_toml_str(&bad).is_err());
    }
}
