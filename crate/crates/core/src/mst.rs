//! Maximum spanning arborescence decoding (Chu-Liu-Edmonds).
//!
//! Among all optimal trees the lexicographically smallest head vector is
//! returned. Ties are resolved by fixing heads left to right: for each
//! dependent the smallest head is kept for which a constrained decode still
//! reaches the optimal score.

use thiserror::Error;

use crate::ingest::ScoreMatrix;
use crate::treebank::validate_heads;

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Largest sentence the brute-force decoder accepts.
pub const BRUTE_FORCE_LIMIT: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MstError {
    #[error("no tree with finite score exists under the constraints")]
    Infeasible,
    #[error("brute force is limited to {BRUTE_FORCE_LIMIT} tokens, got {0}")]
    SizeLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedTree {
    /// Head of each dependent 1..=n, 0 being the root.
    pub heads: Vec<usize>,
    pub total_score: f64,
}

/// Sum of arc scores in dependent order.
pub fn tree_score(matrix: &ScoreMatrix, heads: &[usize]) -> f64 {
    heads.iter().enumerate().map(|(i, &h)| matrix.get(i + 1, h)).sum()
}

/// Dense arc weights, `w[dep][head]` over nodes 0..=n (row 0 unused).
type Weights = Vec<Vec<f64>>;

fn weights_of(matrix: &ScoreMatrix) -> Weights {
    let n = matrix.n();
    let mut w = vec![vec![NEG_INF; n + 1]; n + 1];
    for (d, row) in w.iter_mut().enumerate().skip(1) {
        row.copy_from_slice(matrix.row(d));
        row[d] = NEG_INF;
    }
    w
}

/// Core contraction algorithm. Returns heads for nodes 1..m-1 (index 0 is
/// a dummy) or `None` when some node has no finite incoming arc.
fn chu_liu_edmonds(w: &Weights) -> Option<Vec<usize>> {
    let m = w.len();
    let mut best = vec![0usize; m];
    for v in 1..m {
        let mut arg = None;
        let mut top = NEG_INF;
        for (u, &s) in w[v].iter().enumerate() {
            if u != v && s > top {
                top = s;
                arg = Some(u);
            }
        }
        best[v] = arg?;
    }

    let Some(cycle) = find_cycle_from(&best) else {
        return Some(best);
    };
    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // contracted node ids: non-cycle nodes keep their order, the cycle
    // becomes the last node
    let mut map = vec![0usize; m];
    let mut next = 0;
    for v in 0..m {
        if !in_cycle[v] {
            map[v] = next;
            next += 1;
        }
    }
    let c = next;
    for &v in &cycle {
        map[v] = c;
    }
    let size = c + 1;
    let mut cw = vec![vec![NEG_INF; size]; size];
    // for arcs into the cycle: which member the outside head enters
    let mut enter = vec![usize::MAX; m];
    // for arcs out of the cycle: which member serves as head of v
    let mut leave = vec![usize::MAX; m];

    for v in 1..m {
        if in_cycle[v] {
            continue;
        }
        for u in 0..m {
            if u == v {
                continue;
            }
            let s = w[v][u];
            if in_cycle[u] {
                if s > cw[map[v]][c] {
                    cw[map[v]][c] = s;
                    leave[v] = u;
                }
            } else {
                cw[map[v]][map[u]] = s;
            }
        }
    }
    for &v in &cycle {
        let base = w[v][best[v]];
        for u in 0..m {
            if in_cycle[u] {
                continue;
            }
            let s = w[v][u] - base;
            if s > cw[c][map[u]] {
                cw[c][map[u]] = s;
                enter[u] = v;
            }
        }
    }

    let sub = chu_liu_edmonds(&cw)?;

    let mut unmap = vec![0usize; size];
    for v in 0..m {
        if !in_cycle[v] {
            unmap[map[v]] = v;
        }
    }
    let mut heads = vec![0usize; m];
    for v in 1..m {
        if in_cycle[v] {
            heads[v] = best[v];
            continue;
        }
        let h = sub[map[v]];
        heads[v] = if h == c { leave[v] } else { unmap[h] };
    }
    let outside = unmap[sub[c]];
    let v = enter[outside];
    heads[v] = outside;
    Some(heads)
}

fn find_cycle_from(best: &[usize]) -> Option<Vec<usize>> {
    let m = best.len();
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = best[v];
        }
        let found = (state[v] == 1).then(|| {
            let pos = path.iter().position(|&p| p == v).expect("on path");
            path[pos..].to_vec()
        });
        for &p in &path {
            state[p] = 2;
        }
        if found.is_some() {
            return found;
        }
    }
    None
}

fn score_of(w: &Weights, heads: &[usize]) -> f64 {
    (1..w.len()).map(|d| w[d][heads[d]]).sum()
}

/// Upper bound ignoring the tree constraint.
fn row_max_bound(w: &Weights) -> f64 {
    (1..w.len()).map(|d| w[d].iter().copied().fold(NEG_INF, f64::max)).sum()
}

/// Optimal tree under `w` with the lexicographically smallest head vector
/// among ties. Returns heads indexed 1..m-1 and the score.
fn lexicographic_best(w: &Weights) -> Option<(Vec<usize>, f64)> {
    let mut heads = chu_liu_edmonds(w)?;
    let best = score_of(w, &heads);
    if !best.is_finite() {
        return None;
    }
    let mut fixed = w.clone();
    for d in 1..w.len() {
        for h in 0..heads[d] {
            if fixed[d][h] == NEG_INF {
                continue;
            }
            let mut trial = fixed.clone();
            for (u, s) in trial[d].iter_mut().enumerate() {
                if u != h {
                    *s = NEG_INF;
                }
            }
            if row_max_bound(&trial) < best {
                continue;
            }
            if let Some(t) = chu_liu_edmonds(&trial) {
                if score_of(w, &t) == best {
                    heads = t;
                    break;
                }
            }
        }
        let keep = heads[d];
        for (u, s) in fixed[d].iter_mut().enumerate() {
            if u != keep {
                *s = NEG_INF;
            }
        }
    }
    Some((heads, best))
}

fn better(candidate: &(Vec<usize>, f64), incumbent: &Option<(Vec<usize>, f64)>) -> bool {
    match incumbent {
        None => true,
        Some((h, s)) => candidate.1 > *s || (candidate.1 == *s && candidate.0 < *h),
    }
}

/// Highest-scoring arborescence rooted at node 0. With `single_root`, exactly
/// one token attaches to the root; each candidate root child is tried in
/// turn with every other root arc masked.
pub fn decode(matrix: &ScoreMatrix, single_root: bool) -> Result<DecodedTree, MstError> {
    let n = matrix.n();
    let w = weights_of(matrix);
    let best = if !single_root {
        lexicographic_best(&w)
    } else {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for r in 1..=n {
            if w[r][0] == NEG_INF {
                continue;
            }
            let mut masked = w.clone();
            for (d, row) in masked.iter_mut().enumerate().skip(1) {
                if d == r {
                    for s in row.iter_mut().skip(1) {
                        *s = NEG_INF;
                    }
                } else {
                    row[0] = NEG_INF;
                }
            }
            if let Some(found) = lexicographic_best(&masked) {
                if better(&found, &best) {
                    best = Some(found);
                }
            }
        }
        best
    };
    let (heads, _) = best.ok_or(MstError::Infeasible)?;
    let heads = heads[1..].to_vec();
    debug_assert!(validate_heads(&heads, single_root).is_ok());
    Ok(DecodedTree {
        total_score: tree_score(matrix, &heads),
        heads,
    })
}

/// Exhaustive search over all head vectors, for testing. Visits vectors in
/// lexicographic order and keeps the first maximum, so ties resolve to the
/// smallest vector.
pub fn brute_force_decode(matrix: &ScoreMatrix, single_root: bool) -> Result<DecodedTree, MstError> {
    let n = matrix.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(MstError::SizeLimit(n));
    }
    let mut heads = vec![0usize; n];
    let mut best: Option<DecodedTree> = None;
    loop {
        if validate_heads(&heads, single_root).is_ok() {
            let score = tree_score(matrix, &heads);
            if score.is_finite() && best.as_ref().is_none_or(|b| score > b.total_score) {
                best = Some(DecodedTree {
                    heads: heads.clone(),
                    total_score: score,
                });
            }
        }
        // odometer increment, last position fastest
        let mut i = n;
        loop {
            if i == 0 {
                return best.ok_or(MstError::Infeasible);
            }
            i -= 1;
            if heads[i] < n {
                heads[i] += 1;
                break;
            }
            heads[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const X: f64 = NEG_INF;

    fn m(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        ScoreMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_token() {
        let t = decode(&m(vec![vec![0.0, X]]), true).unwrap();
        assert_eq!(t.heads, vec![0]);
        assert_eq!(t.total_score, 0.0);
    }

    #[test]
    fn contracts_greedy_cycle() {
        let mat = m(vec![vec![1.0, X, 3.0], vec![2.0, 2.5, X]]);
        for single in [false, true] {
            let t = decode(&mat, single).unwrap();
            assert_eq!(t.heads, vec![2, 0]);
            assert_eq!(t.total_score, 5.0);
            assert_eq!(brute_force_decode(&mat, single).unwrap(), t);
        }
    }

    #[test]
    fn greedy_tree_is_returned_when_valid() {
        let mat = m(vec![
            vec![0.0, X, 5.0, 0.0],
            vec![9.0, 0.0, X, 0.0],
            vec![0.0, 0.0, 7.0, X],
        ]);
        assert_eq!(decode(&mat, true).unwrap().heads, vec![2, 0, 2]);
    }

    #[test]
    fn ties_resolve_to_smallest_vector() {
        let mat = m(vec![vec![1.0; 4]; 3]);
        assert_eq!(brute_force_decode(&mat, false).unwrap().heads, vec![0, 0, 0]);
        assert_eq!(decode(&mat, false).unwrap().heads, vec![0, 0, 0]);
        assert_eq!(brute_force_decode(&mat, true).unwrap().heads, vec![0, 1, 1]);
        assert_eq!(decode(&mat, true).unwrap().heads, vec![0, 1, 1]);
    }

    #[test]
    fn brute_force_size_limit() {
        let mat = m(vec![vec![0.0; 8]; 7]);
        assert_eq!(brute_force_decode(&mat, false), Err(MstError::SizeLimit(7)));
    }

    #[test]
    fn infeasible_single_root() {
        let mat = m(vec![vec![X, X, 1.0], vec![X, 1.0, X]]);
        assert_eq!(decode(&mat, true), Err(MstError::Infeasible));
        assert_eq!(brute_force_decode(&mat, true), Err(MstError::Infeasible));
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, integer: bool) -> ScoreMatrix {
        let rows = (0..n)
            .map(|_| {
                let mut row: Vec<f64> = (0..=n)
                    .map(|_| {
                        if rng.random_bool(0.1) {
                            X
                        } else if integer {
                            rng.random_range(0..3) as f64
                        } else {
                            rng.random_range(-5.0..5.0)
                        }
                    })
                    .collect();
                if row.iter().all(|v| *v == X) {
                    row[0] = 0.0;
                }
                row
            })
            .collect();
        ScoreMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = rng.random_range(1..=5);
            let mat = random_matrix(&mut rng, n, true);
            for single in [false, true] {
                assert_eq!(decode(&mat, single), brute_force_decode(&mat, single), "{mat:?}");
            }
        }
    }

    #[test]
    fn row_shift_moves_score_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(2..=8);
            let mat = random_matrix(&mut rng, n, false);
            let before = decode(&mat, false).unwrap();
            let row = rng.random_range(1..=n);
            let c = rng.random_range(-3.0..3.0);
            let mut shifted = mat.clone();
            for h in 0..=n {
                shifted.set(row, h, mat.get(row, h) + c);
            }
            let after = decode(&shifted, false).unwrap();
            assert_eq!(after.heads, before.heads);
            assert!((after.total_score - before.total_score - c).abs() < 1e-9);
        }
    }

    #[test]
    fn long_sentences_decode_to_valid_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [10, 25, 60] {
            let mat = random_matrix(&mut rng, n, false);
            for single in [false, true] {
                let t = decode(&mat, single).unwrap();
                assert!(validate_heads(&t.heads, single).is_ok());
            }
        }
    }
}
