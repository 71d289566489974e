use std::fmt::Write as _;

use super::{utf8, IngestError};

/// Arc scores for one sentence: row `i` (dependent `i`, 1-based) holds the
/// score of attaching to each head column `0..=n`.
///
/// Self-arcs on the diagonal are ignored by consumers and are usually
/// `-inf`. Every row must hold at least one finite score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a matrix from `n` rows of `n + 1` scores. Entries must be finite
    /// or `-inf`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        let n = rows.len();
        if n == 0 {
            return Err("score matrix needs at least one row".to_string());
        }
        let mut scores = Vec::with_capacity(n * (n + 1));
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n + 1 {
                return Err(format!("row {} has {} entries, expected {}", i + 1, row.len(), n + 1));
            }
            if let Some(bad) = row.iter().find(|v| !(v.is_finite() || **v == f64::NEG_INFINITY)) {
                return Err(format!("row {} holds invalid score {bad}", i + 1));
            }
            if row.iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(format!("row {} has no finite score", i + 1));
            }
            scores.extend(row);
        }
        Ok(ScoreMatrix { n, scores })
    }

    /// Number of dependents.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Score of `dependent` (1-based) attaching to `head` (0..=n).
    pub fn get(&self, dependent: usize, head: usize) -> f64 {
        debug_assert!((1..=self.n).contains(&dependent) && head <= self.n);
        self.scores[(dependent - 1) * (self.n + 1) + head]
    }

    pub fn set(&mut self, dependent: usize, head: usize, value: f64) {
        self.scores[(dependent - 1) * (self.n + 1) + head] = value;
    }

    /// Row of `dependent` (1-based), indexed by head.
    pub fn row(&self, dependent: usize) -> &[f64] {
        let w = self.n + 1;
        &self.scores[(dependent - 1) * w..dependent * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.scores.chunks(self.n + 1)
    }
}

/// Parses blank-line separated blocks of `n=<k>` followed by `k` rows of
/// `k + 1` whitespace-separated scores (`-inf` allowed).
pub fn read_score_matrices(bytes: &[u8]) -> Result<Vec<ScoreMatrix>, IngestError> {
    let text = utf8(bytes)?;
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).peekable();
    loop {
        while lines.peek().is_some_and(|(_, l)| l.is_empty()) {
            lines.next();
        }
        let Some((hline, header)) = lines.next() else { break };
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|k| k.trim().parse().ok())
            .filter(|&k| k > 0)
            .ok_or_else(|| IngestError::HeaderMismatch {
                line: hline,
                message: format!("expected header `n=<k>` with k >= 1, found {header:?}"),
            })?;
        let mut rows = Vec::with_capacity(n);
        for row in 1..=n {
            let (line, text) = match lines.next() {
                Some((line, l)) if !l.is_empty() && !l.starts_with("n=") => (line, l),
                Some((line, _)) => {
                    return Err(IngestError::HeaderMismatch {
                        line,
                        message: format!("block declares n={n} but has {} rows", row - 1),
                    })
                }
                None => {
                    return Err(IngestError::HeaderMismatch {
                        line: hline,
                        message: format!("block declares n={n} but has {} rows", row - 1),
                    })
                }
            };
            let values = text
                .split_whitespace()
                .map(|v| {
                    parse_score(v).ok_or_else(|| IngestError::NonNumeric {
                        line,
                        value: v.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if values.len() != n + 1 {
                return Err(IngestError::RowLength {
                    line,
                    expected: n + 1,
                    found: values.len(),
                });
            }
            if values.iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(IngestError::EmptyRow { line, row });
            }
            rows.push(values);
        }
        if let Some((line, l)) = lines.peek() {
            if !l.is_empty() {
                return Err(IngestError::HeaderMismatch {
                    line: *line,
                    message: format!("block declares n={n} but has more rows"),
                });
            }
        }
        out.push(ScoreMatrix::from_rows(rows).expect("rows validated above"));
    }
    Ok(out)
}

fn parse_score(v: &str) -> Option<f64> {
    if v == "-inf" {
        return Some(f64::NEG_INFINITY);
    }
    let x: f64 = v.parse().ok()?;
    x.is_finite().then_some(x)
}

/// Writes matrices with shortest round-trip float formatting, so finite
/// values survive a read back bit for bit.
pub fn write_score_matrices(matrices: &[ScoreMatrix]) -> Vec<u8> {
    let mut out = String::new();
    for (k, m) in matrices.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "n={}", m.n);
        for row in m.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|v| {
                    if *v == f64::NEG_INFINITY {
                        "-inf".to_string()
                    } else {
                        format!("{v:?}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    out.into_bytes()
}
