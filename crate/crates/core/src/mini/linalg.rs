//! Dense row-major helpers over flat slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = W x + b` for a `rows x cols` matrix.
pub fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    debug_assert_eq!(w.len(), b.len() * cols);
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + dot(&w[r * cols..(r + 1) * cols], x))
        .collect()
}

/// `dx += W^T dy`.
pub fn add_transpose_product(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (r, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        for (d, wv) in dx.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *d += g * wv;
        }
    }
}

/// `gw += dy x^T`.
pub fn add_outer(gw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        for (gv, xv) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gv += g * xv;
        }
    }
}

pub fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of `target` under softmax(logits), skipping `-inf` entries.
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_xent(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let log_z = m + z.ln();
    let mut grad: Vec<f64> = logits.iter().map(|l| (l - log_z).exp()).collect();
    grad[target] -= 1.0;
    (log_z - logits[target], grad)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
