//! Negative-sampling update kernels.
//!
//! For an input vector `h` (a token row, a sum of subword rows, or the mean of
//! context rows), a positive output row `o_p` and noise rows `o_n`:
//!
//! ```text
//! loss = -ln σ(o_p·h) - Σ_n ln σ(-o_n·h)
//! ```

use super::matrix::RowStore;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients for `h` against `outs` (row-major, first row positive).
/// Writes `∂loss/∂h` into `grad_h` and `∂loss/∂o_j` into `grad_outs`.
fn ns_kernel(h: &[f64], outs: &[f64], grad_h: &mut [f64], grad_outs: &mut [f64]) -> f64 {
    let dim = h.len();
    grad_h.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (j, (o, go)) in outs.chunks_exact(dim).zip(grad_outs.chunks_exact_mut(dim)).enumerate() {
        let z = dot(o, h);
        let (label, l) = if j == 0 { (1.0, -log_sigmoid(z)) } else { (0.0, -log_sigmoid(-z)) };
        loss += l;
        let g = sigmoid(z) - label;
        for k in 0..dim {
            grad_h[k] += g * o[k];
            go[k] = g * h[k];
        }
    }
    loss
}

/// Gradients of the negative-sampling loss with respect to each input row
/// when `h = scale · Σ rows`, and with respect to every output row.
#[derive(Debug, Clone)]
pub struct NsGradients {
    pub loss: f64,
    pub input_rows: Vec<Vec<f64>>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn ns_loss_grad(input_rows: &[&[f64]], scale: f64, positive: &[f64], negatives: &[&[f64]]) -> NsGradients {
    let dim = positive.len();
    let mut h = vec![0.0; dim];
    for r in input_rows {
        for k in 0..dim {
            h[k] += scale * r[k];
        }
    }
    let mut outs = positive.to_vec();
    for n in negatives {
        outs.extend_from_slice(n);
    }
    let mut grad_h = vec![0.0; dim];
    let mut grad_outs = vec![0.0; outs.len()];
    let loss = ns_kernel(&h, &outs, &mut grad_h, &mut grad_outs);
    let row_grad: Vec<f64> = grad_h.iter().map(|g| g * scale).collect();
    let mut chunks = grad_outs.chunks_exact(dim).map(<[f64]>::to_vec);
    let positive = chunks.next().expect("positive row");
    NsGradients {
        loss,
        input_rows: vec![row_grad; input_rows.len()],
        positive,
        negatives: chunks.collect(),
    }
}

/// Loss only, for finite-difference checks.
pub fn ns_loss(input_rows: &[&[f64]], scale: f64, positive: &[f64], negatives: &[&[f64]]) -> f64 {
    let dim = positive.len();
    let mut h = vec![0.0; dim];
    for r in input_rows {
        for k in 0..dim {
            h[k] += scale * r[k];
        }
    }
    -log_sigmoid(dot(positive, &h)) - negatives.iter().map(|n| log_sigmoid(-dot(n, &h))).sum::<f64>()
}

/// Reusable buffers for the update kernels.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    h: Vec<f64>,
    row: Vec<f64>,
    grad_h: Vec<f64>,
    outs: Vec<f64>,
    grad_outs: Vec<f64>,
    out_ids: Vec<usize>,
}

/// One SGD step of the negative-sampling loss. The input vector is
/// `input_scale · Σ input_rows`; each input row moves by
/// `-alpha · update_scale · ∂loss/∂row`. Every gradient is computed from the
/// pre-update values before any row is written. Returns the loss.
#[allow(clippy::too_many_arguments)]
pub fn ns_step<S: RowStore>(
    store: &mut S,
    input_rows: &[usize],
    input_scale: f64,
    update_scale: f64,
    positive: usize,
    negatives: &[usize],
    alpha: f64,
    scratch: &mut Scratch,
) -> f64 {
    if input_rows.is_empty() {
        return 0.0;
    }
    let dim = store.dim();
    let Scratch { h, row, grad_h, outs, grad_outs, out_ids } = scratch;
    h.clear();
    h.resize(dim, 0.0);
    row.resize(dim, 0.0);
    grad_h.resize(dim, 0.0);
    for &r in input_rows {
        store.read_input(r, row);
        for k in 0..dim {
            h[k] += input_scale * row[k];
        }
    }
    out_ids.clear();
    out_ids.push(positive);
    out_ids.extend_from_slice(negatives);
    outs.resize(out_ids.len() * dim, 0.0);
    grad_outs.resize(out_ids.len() * dim, 0.0);
    for (j, &id) in out_ids.iter().enumerate() {
        store.read_output(id, &mut outs[j * dim..(j + 1) * dim]);
    }
    let loss = ns_kernel(h, outs, grad_h, grad_outs);
    if alpha == 0.0 {
        return loss;
    }
    for (j, &id) in out_ids.iter().enumerate() {
        store.add_output(id, &grad_outs[j * dim..(j + 1) * dim], -alpha);
    }
    let s = -alpha * update_scale * input_scale;
    for &r in input_rows {
        store.add_input(r, grad_h, s);
    }
    loss
}

/// Skip-gram pair: `target` input row against `context` output row.
pub fn sgns_pair_step<S: RowStore>(
    store: &mut S,
    target: usize,
    context: usize,
    negatives: &[usize],
    alpha: f64,
    scratch: &mut Scratch,
) -> f64 {
    ns_step(store, &[target], 1.0, 1.0, context, negatives, alpha, scratch)
}

/// CBOW: mean of the context input rows against the `target` output row.
/// An empty context window leaves the matrices untouched.
pub fn cbow_step<S: RowStore>(
    store: &mut S,
    context_window: &[usize],
    target: usize,
    negatives: &[usize],
    alpha: f64,
    scratch: &mut Scratch,
) -> f64 {
    if context_window.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / context_window.len() as f64;
    ns_step(store, context_window, scale, 1.0, target, negatives, alpha, scratch)
}
