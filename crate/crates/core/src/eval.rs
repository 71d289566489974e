//! CoNLL-2018 style token-level scoring.
//!
//! Gold tokenization is a precondition, so precision equals recall and each
//! F1 reduces to the share of matching tokens.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::normalize::{canonicalize_apostrophes, DEFAULT_APOSTROPHE_SOURCES};
use crate::treebank::{postag_to_feats, validate_tree, Sentence, Token, TreeVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("tokenization mismatch: {0}")]
    TokenizationMismatch(String),
    #[error("system sentence {sentence_id:?} is not a valid tree: {verdict}")]
    InvalidSystemTree { sentence_id: String, verdict: TreeVerdict },
    #[error("need at least two scores, found {0}")]
    TooFewScores(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// System trees must be acyclic with exactly one root child.
    #[default]
    StrictTree,
    Permissive,
}

pub const METRICS: [&str; 7] = ["POS", "XPOS", "Feats", "AllTags", "UAS", "LAS", "Lemmas"];

/// Match counts per metric, in [`METRICS`] order, over `total` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalReport {
    pub matches: [u64; 7],
    pub token_total: u64,
}

impl EvalReport {
    fn f1(&self, k: usize) -> f64 {
        if self.token_total == 0 {
            return 0.0;
        }
        100.0 * self.matches[k] as f64 / self.token_total as f64
    }

    pub fn pos(&self) -> f64 {
        self.f1(0)
    }
    pub fn xpos(&self) -> f64 {
        self.f1(1)
    }
    pub fn feats(&self) -> f64 {
        self.f1(2)
    }
    pub fn alltags(&self) -> f64 {
        self.f1(3)
    }
    pub fn uas(&self) -> f64 {
        self.f1(4)
    }
    pub fn las(&self) -> f64 {
        self.f1(5)
    }
    pub fn lemmas(&self) -> f64 {
        self.f1(6)
    }

    /// F1 for every metric, in [`METRICS`] order.
    pub fn scores(&self) -> [f64; 7] {
        std::array::from_fn(|k| self.f1(k))
    }

    /// Two-decimal rendering of one metric, rounded half away from zero on
    /// the exact ratio.
    pub fn rendered(&self, k: usize) -> String {
        if self.token_total == 0 {
            return "0.00".to_string();
        }
        let (m, t) = (self.matches[k] as u128, self.token_total as u128);
        let hundredths = (20_000 * m + t) / (2 * t);
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }

    /// `metric<TAB>F1` lines in metric order.
    pub fn render_table(&self) -> String {
        METRICS
            .iter()
            .enumerate()
            .map(|(k, name)| format!("{name}\t{}\n", self.rendered(k)))
            .collect()
    }

    /// `key=value` lines for machine consumption.
    pub fn render_kv(&self) -> String {
        let mut out: String = METRICS
            .iter()
            .enumerate()
            .map(|(k, name)| format!("{}={}\n", name.to_lowercase(), self.rendered(k)))
            .collect();
        out.push_str(&format!("token_total={}\n", self.token_total));
        out
    }
}

impl std::ops::AddAssign for EvalReport {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.matches.iter_mut().zip(o.matches) {
            *a += b;
        }
        self.token_total += o.token_total;
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_table())
    }
}

fn lemma_key(lemma: &str) -> String {
    let sources: BTreeSet<char> = DEFAULT_APOSTROPHE_SOURCES.into_iter().collect();
    canonicalize_apostrophes(lemma, &sources).0
}

fn token_matches(gold: &Token, sys: &Token) -> [bool; 7] {
    let pos = gold.pos() == sys.pos();
    let xpos = gold.postag == sys.postag;
    let feats = match (postag_to_feats(&gold.postag), postag_to_feats(&sys.postag)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let uas = gold.head == sys.head;
    [
        pos,
        xpos,
        feats,
        pos && xpos && feats,
        uas,
        uas && gold.relation == sys.relation,
        lemma_key(&gold.lemma) == lemma_key(&sys.lemma),
    ]
}

/// Scores one sentence pair.
pub fn evaluate_sentence(gold: &Sentence, system: &Sentence, mode: EvalMode) -> Result<EvalReport, EvalError> {
    if gold.len() != system.len() {
        return Err(EvalError::TokenizationMismatch(format!(
            "sentence {:?} has {} gold and {} system tokens",
            gold.sentence_id,
            gold.len(),
            system.len()
        )));
    }
    if let Some((g, s)) = gold.tokens.iter().zip(&system.tokens).find(|(g, s)| g.form != s.form) {
        return Err(EvalError::TokenizationMismatch(format!(
            "sentence {:?} token {}: gold form {:?}, system form {:?}",
            gold.sentence_id, g.id, g.form, s.form
        )));
    }
    if mode == EvalMode::StrictTree {
        let verdict = validate_tree(system, true);
        if !verdict.is_ok() {
            return Err(EvalError::InvalidSystemTree {
                sentence_id: system.sentence_id.clone(),
                verdict,
            });
        }
    }
    let mut report = EvalReport {
        token_total: gold.len() as u64,
        ..Default::default()
    };
    for (g, s) in gold.tokens.iter().zip(&system.tokens) {
        for (k, hit) in token_matches(g, s).into_iter().enumerate() {
            report.matches[k] += hit as u64;
        }
    }
    Ok(report)
}

/// Scores a system file against gold, sentence by sentence.
pub fn evaluate(gold: &[Sentence], system: &[Sentence], mode: EvalMode) -> Result<EvalReport, EvalError> {
    if gold.len() != system.len() {
        return Err(EvalError::TokenizationMismatch(format!(
            "{} gold and {} system sentences",
            gold.len(),
            system.len()
        )));
    }
    let mut report = EvalReport::default();
    for (g, s) in gold.iter().zip(system) {
        report += evaluate_sentence(g, s, mode)?;
    }
    Ok(report)
}

/// Arithmetic mean and Bessel-corrected sample standard deviation.
pub fn mean_and_sd(scores: &[f64]) -> Result<(f64, f64), EvalError> {
    let n = scores.len();
    if n < 2 {
        return Err(EvalError::TooFewScores(n));
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Two decimals, rounding half away from zero.
pub fn format_2dp(x: f64) -> String {
    // the 1e-9 nudge absorbs binary representation error at exact halves
    let scaled = x * 100.0;
    let rounded = (scaled + scaled.signum() * 1e-9).round();
    let v = rounded / 100.0;
    if v == 0.0 {
        "0.00".to_string()
    } else {
        format!("{v:.2}")
    }
}

/// Table-style `mean (sd)` cell.
pub fn format_mean_sd(scores: &[f64]) -> Result<String, EvalError> {
    let (m, sd) = mean_and_sd(scores)?;
    Ok(format!("{} ({})", format_2dp(m), format_2dp(sd)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::fixtures::sentence;

    #[test]
    fn identity_is_perfect() {
        let gold = vec![sentence(&[2, 0, 2]), sentence(&[0])];
        let r = evaluate(&gold, &gold, EvalMode::StrictTree).unwrap();
        for k in 0..7 {
            assert_eq!(r.rendered(k), "100.00");
        }
    }

    #[test]
    fn one_wrong_head_of_three() {
        let gold = vec![sentence(&[2, 0, 2])];
        let sys = vec![sentence(&[2, 0, 1])];
        let r = evaluate(&gold, &sys, EvalMode::StrictTree).unwrap();
        assert_eq!(r.rendered(4), "66.67");
        assert_eq!(r.rendered(5), "66.67");
        for k in [0, 1, 2, 3, 6] {
            assert_eq!(r.rendered(k), "100.00");
        }
    }

    #[test]
    fn cyclic_system_rejected_in_strict_mode() {
        let gold = vec![sentence(&[2, 0])];
        let sys = vec![sentence(&[2, 1])];
        assert!(matches!(
            evaluate(&gold, &sys, EvalMode::StrictTree),
            Err(EvalError::InvalidSystemTree {
                verdict: TreeVerdict::Cycle(_),
                ..
            })
        ));
        let r = evaluate(&gold, &sys, EvalMode::Permissive).unwrap();
        assert_eq!(r.rendered(4), "50.00");
    }

    #[test]
    fn multiple_roots_rejected_in_strict_mode() {
        let gold = vec![sentence(&[0, 1, 1])];
        let sys = vec![sentence(&[0, 0, 1])];
        assert!(matches!(
            evaluate(&gold, &sys, EvalMode::StrictTree),
            Err(EvalError::InvalidSystemTree {
                verdict: TreeVerdict::MultipleRoots(_),
                ..
            })
        ));
    }

    #[test]
    fn alltags_needs_every_tag() {
        let gold = vec![sentence(&[0, 1, 1, 1])];
        let mut sys = gold.clone();
        sys[0].tokens[2].postag = "n-p---mn-".to_string();
        let r = evaluate(&gold, &sys, EvalMode::StrictTree).unwrap();
        assert_eq!(r.rendered(0), "100.00");
        assert_eq!(r.rendered(2), "75.00");
        assert_eq!(r.rendered(3), "75.00");
    }

    #[test]
    fn lemmas_compare_canonical_apostrophes() {
        let mut gold = vec![sentence(&[0])];
        gold[0].tokens[0].lemma = "δ\u{2019}".to_string();
        let mut sys = gold.clone();
        sys[0].tokens[0].lemma = "δ\u{02BC}".to_string();
        assert_eq!(
            evaluate(&gold, &sys, EvalMode::StrictTree).unwrap().rendered(6),
            "100.00"
        );
    }

    #[test]
    fn tokenization_must_agree() {
        let gold = vec![sentence(&[0, 1])];
        let mut sys = gold.clone();
        sys[0].tokens[1].form = "other".to_string();
        assert!(matches!(
            evaluate(&gold, &sys, EvalMode::Permissive),
            Err(EvalError::TokenizationMismatch(_))
        ));
        assert!(matches!(
            evaluate(&gold, &[], EvalMode::Permissive),
            Err(EvalError::TokenizationMismatch(_))
        ));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // 1/8 = 12.5%, 1/16 = 6.25%, 1/1600 = 0.0625%
        let r = |m, t| {
            EvalReport {
                matches: [m; 7],
                token_total: t,
            }
            .rendered(0)
        };
        assert_eq!(r(1, 8), "12.50");
        assert_eq!(r(1, 16), "6.25");
        assert_eq!(r(1, 1600), "0.06");
        assert_eq!(r(1, 800), "0.13");
        assert_eq!(r(2, 3), "66.67");
        assert_eq!(format_2dp(0.125), "0.13");
        assert_eq!(format_2dp(-0.125), "-0.13");
        assert_eq!(format_2dp(96.18), "96.18");
    }

    #[test]
    fn mean_and_sample_sd() {
        let (m, sd) = mean_and_sd(&[96.18; 10]).unwrap();
        assert!((m - 96.18).abs() < 1e-12);
        assert!(sd < 1e-12);
        let (m, sd) = mean_and_sd(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((sd - 1.2909944487358056).abs() < 1e-15);
        let (m, sd) = mean_and_sd(&[0.0, 100.0]).unwrap();
        assert_eq!(m, 50.0);
        assert!((sd - 5000f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_sd(&[1.0]), Err(EvalError::TooFewScores(1)));
        assert_eq!(format_mean_sd(&[96.18; 10]).unwrap(), "96.18 (0.00)");
    }
}
