//! Bayesian correlated t-test for cross-validated model comparison.
//!
//! The posterior of the mean score difference is a Student-t with `n - 1`
//! degrees of freedom, located at the mean paired difference, with a scale
//! inflated by `rho / (1 - rho)` to account for overlapping training folds.
//! Its mass left of, inside, and right of the region of practical
//! equivalence (rope) gives the three reported probabilities.

use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::format_2dp;

pub const DEFAULT_ROPE: Rope = Rope { lo: -1.0, hi: 1.0 };
/// One over the number of folds.
pub const DEFAULT_RHO: f64 = 0.2;

/// Continued-fraction convergence threshold.
const CF_EPS: f64 = 1e-14;
const CF_MAX_ITER: usize = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error("score vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("rope [{0}, {1}] is empty")]
    DegenerateRope(f64, f64),
    #[error("rho must lie in [0, 1), got {0}")]
    InvalidRho(f64),
    #[error("model {0:?}: need at least two scores")]
    TooFewScores(String),
    #[error("model {0:?}: score {1} outside [0, 100]")]
    ScoreOutOfRange(String, f64),
    #[error("need at least two models, found {0}")]
    TooFewModels(usize),
    #[error("posterior is a point mass; there is no density to sample")]
    DegeneratePosterior,
    #[error("grid needs at least two points")]
    TooFewPoints,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rope {
    pub lo: f64,
    pub hi: f64,
}

/// Per-run F1 scores of one model; entries of two vectors pair up by run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub model_name: String,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(model_name: impl Into<String>, scores: Vec<f64>) -> Result<Self, BayesError> {
        let model_name = model_name.into();
        if scores.len() < 2 {
            return Err(BayesError::TooFewScores(model_name));
        }
        if let Some(&bad) = scores.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(BayesError::ScoreOutOfRange(model_name, bad));
        }
        Ok(ScoreVector { model_name, scores })
    }
}

/// Parses `name<TAB>v1<TAB>...` lines; blank lines and `#` comments are skipped.
pub fn read_score_vectors(text: &str) -> Result<Vec<ScoreVector>, BayesError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut cols = raw.trim_end_matches('\r').split('\t');
        let name = cols.next().unwrap_or_default().trim();
        let scores = cols
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| BayesError::Parse {
                    line,
                    message: format!("not a number: {c:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let v = ScoreVector::new(name, scores).map_err(|e| BayesError::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean_diff: f64,
    /// Zero when degenerate.
    pub scale: f64,
    pub dof: u32,
    pub rho: f64,
    pub rope: Rope,
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
    /// All differences equal: the posterior collapses to a point mass.
    pub degenerate: bool,
}

/// Compares `x` against `y` on paired differences `x_i - y_i`.
///
/// With zero spread in the differences the posterior is a point mass at the
/// mean and all probability goes to the region containing it, the closed
/// rope winning at its boundaries.
pub fn correlated_ttest(
    x: &ScoreVector,
    y: &ScoreVector,
    rope: Rope,
    rho: f64,
) -> Result<PosteriorSummary, BayesError> {
    if x.scores.len() != y.scores.len() {
        return Err(BayesError::LengthMismatch(x.scores.len(), y.scores.len()));
    }
    if rope.lo.is_nan() || rope.hi.is_nan() || rope.lo >= rope.hi {
        return Err(BayesError::DegenerateRope(rope.lo, rope.hi));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(BayesError::InvalidRho(rho));
    }
    let n = x.scores.len();
    let diffs: Vec<f64> = x.scores.iter().zip(&y.scores).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let dof = (n - 1) as u32;

    // differences of F1 percentages within 1e-12 of each other are equal
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        let (p_left, p_rope, p_right) = if mean < rope.lo {
            (1.0, 0.0, 0.0)
        } else if mean > rope.hi {
            (0.0, 0.0, 1.0)
        } else {
            (0.0, 1.0, 0.0)
        };
        return Ok(PosteriorSummary {
            mean_diff: mean,
            scale: 0.0,
            dof,
            rho,
            rope,
            p_left,
            p_rope,
            p_right,
            degenerate: true,
        });
    }

    let scale = ((1.0 / n as f64 + rho / (1.0 - rho)) * var).sqrt();
    let p_left = student_t_cdf((rope.lo - mean) / scale, dof);
    // upper tail through symmetry keeps precision near 0
    let p_right = student_t_cdf((mean - rope.hi) / scale, dof);
    let p_rope = (1.0 - (p_left + p_right)).max(0.0);
    Ok(PosteriorSummary {
        mean_diff: mean,
        scale,
        dof,
        rho,
        rope,
        p_left,
        p_rope,
        p_right,
        degenerate: false,
    })
}

/// Natural log of the gamma function (Lanczos, g = 7, nine terms), x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`. `one_minus_x` is passed
/// separately so callers can supply it without cancellation.
pub fn inc_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * one_minus_x.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, one_minus_x) / b
    }
}

/// CDF of the standard Student-t distribution with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: u32) -> f64 {
    assert!(dof >= 1, "dof must be positive");
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let nu = dof as f64;
    let t2 = t * t;
    let x = nu / (nu + t2);
    let tail = 0.5 * inc_beta(nu / 2.0, 0.5, x, t2 / (nu + t2));
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Density of the standard Student-t distribution.
pub fn student_t_pdf(t: f64, dof: u32) -> f64 {
    let nu = dof as f64;
    let ln_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    (ln_norm - (nu + 1.0) / 2.0 * (t * t / nu).ln_1p()).exp()
}

/// Posterior density on `points` evenly spaced values spanning
/// `mean ± span * scale`.
pub fn posterior_grid(summary: &PosteriorSummary, points: usize, span: f64) -> Result<Vec<(f64, f64)>, BayesError> {
    if summary.degenerate || summary.scale <= 0.0 {
        return Err(BayesError::DegeneratePosterior);
    }
    if points < 2 {
        return Err(BayesError::TooFewPoints);
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            // integer numerator keeps the grid exactly symmetric
            let u = span * summary.scale * ((2 * k) as f64 - last) / last;
            let density = student_t_pdf(u / summary.scale, summary.dof) / summary.scale;
            (summary.mean_diff + u, density)
        })
        .collect())
}

pub fn render_grid_csv(grid: &[(f64, f64)]) -> String {
    let mut out = String::from("delta,density\n");
    for (d, p) in grid {
        let _ = writeln!(out, "{d},{p}");
    }
    out
}

/// Trapezoid rule over a grid.
pub fn trapezoid(grid: &[(f64, f64)]) -> f64 {
    grid.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub first: String,
    pub second: String,
    pub summary: PosteriorSummary,
}

impl PairComparison {
    pub fn label(&self) -> String {
        format!("{}-{}", self.first, self.second)
    }
}

/// Every unordered pair, in listing order, as first minus second.
pub fn compare_all_pairs(vectors: &[ScoreVector], rope: Rope, rho: f64) -> Result<Vec<PairComparison>, BayesError> {
    if vectors.len() < 2 {
        return Err(BayesError::TooFewModels(vectors.len()));
    }
    let mut out = Vec::new();
    for (i, x) in vectors.iter().enumerate() {
        for y in &vectors[i + 1..] {
            out.push(PairComparison {
                first: x.model_name.clone(),
                second: y.model_name.clone(),
                summary: correlated_ttest(x, y, rope, rho)?,
            });
        }
    }
    Ok(out)
}

/// Left/Rope/Right table with two-decimal probabilities.
pub fn render_pair_table(pairs: &[PairComparison]) -> String {
    let mut out = String::from("pair\tleft\trope\tright\n");
    for p in pairs {
        let s = &p.summary;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.label(),
            format_2dp(s.p_left),
            format_2dp(s.p_rope),
            format_2dp(s.p_right)
        );
    }
    out
}
