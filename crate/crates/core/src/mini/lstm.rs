//! LSTM cell with backpropagation through time.
//!
//! Weights are one `4h x (in + h)` matrix over `[x; h_prev]` with gate rows
//! ordered input, forget, output, candidate.

use super::linalg::{add_outer, add_transpose_product, affine, sigmoid};

#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    /// `h[0]` is the zero initial state.
    pub h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Activated gates per step: i, f, o, g.
    gates: Vec<Vec<f64>>,
}

pub fn forward(w: &[f64], b: &[f64], hidden: usize, inputs: Vec<Vec<f64>>) -> Trace {
    let steps = inputs.len();
    let mut h = Vec::with_capacity(steps + 1);
    let mut c = Vec::with_capacity(steps + 1);
    let mut gates = Vec::with_capacity(steps);
    h.push(vec![0.0; hidden]);
    c.push(vec![0.0; hidden]);
    for x in &inputs {
        let mut xh = x.clone();
        xh.extend_from_slice(&h[h.len() - 1]);
        let mut z = affine(w, b, &xh);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if k < 3 * hidden { sigmoid(*v) } else { v.tanh() };
        }
        let c_prev = &c[c.len() - 1];
        let c_new: Vec<f64> = (0..hidden)
            .map(|k| z[hidden + k] * c_prev[k] + z[k] * z[3 * hidden + k])
            .collect();
        let h_new: Vec<f64> = (0..hidden).map(|k| z[2 * hidden + k] * c_new[k].tanh()).collect();
        gates.push(z);
        c.push(c_new);
        h.push(h_new);
    }
    Trace { inputs, h, c, gates }
}

/// Accumulates weight gradients given `dh[t]`, the gradient of the loss with
/// respect to the output after step `t`, and returns the input gradients.
pub fn backward(
    w: &[f64],
    hidden: usize,
    trace: &Trace,
    dh: &[Vec<f64>],
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<Vec<f64>> {
    let steps = trace.inputs.len();
    let mut dx = vec![Vec::new(); steps];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for t in (0..steps).rev() {
        let g = &trace.gates[t];
        let c = &trace.c[t + 1];
        let c_prev = &trace.c[t];
        let mut dz = vec![0.0; 4 * hidden];
        for k in 0..hidden {
            let (gi, gf, go, gc) = (g[k], g[hidden + k], g[2 * hidden + k], g[3 * hidden + k]);
            let dht = dh[t][k] + dh_next[k];
            let tc = c[k].tanh();
            let dc = dht * go * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * gc * gi * (1.0 - gi);
            dz[hidden + k] = dc * c_prev[k] * gf * (1.0 - gf);
            dz[2 * hidden + k] = dht * tc * go * (1.0 - go);
            dz[3 * hidden + k] = dc * gi * (1.0 - gc * gc);
            dc_next[k] = dc * gf;
        }
        let mut xh = trace.inputs[t].clone();
        xh.extend_from_slice(&trace.h[t]);
        add_outer(gw, &dz, &xh);
        for (a, v) in gb.iter_mut().zip(&dz) {
            *a += v;
        }
        let mut dxh = vec![0.0; xh.len()];
        add_transpose_product(w, &dz, &mut dxh);
        let input = xh.len() - hidden;
        dh_next = dxh.split_off(input);
        dx[t] = dxh;
    }
    dx
}
