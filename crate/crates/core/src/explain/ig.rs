use rayon::prelude::*;

use crate::nlpml::{CnnModel, SentenceMatrix};

use super::{AttributionVector, ExplainError, Method, QuadratureSpec};

/// A scalar function of a flat input with an analytic gradient.
pub trait Differentiable: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Points in `(0, 1)` where the gradient along `alpha · x` may jump.
    fn breakpoints(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

impl Differentiable for CnnModel {
    fn value(&self, x: &[f64]) -> f64 {
        self.predict_rows(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.input_gradient(x).1
    }

    fn breakpoints(&self, x: &[f64]) -> Vec<f64> {
        self.path_breakpoints(x)
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, found by Newton iteration
/// on the Legendre polynomial of degree `m`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_m(x) and P_m'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = (1.0 - x) / 2.0;
        nodes[m - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[m - 1 - i] = w / 2.0;
    }
    (nodes, weights)
}

/// Integrated Gradients of `f` at `x` against the zero baseline, one value
/// per coordinate. With `split_at_kinks` the rule runs on each piece between
/// the reported breakpoints, which is exact for piecewise-linear `f`.
pub fn integrated_gradients_fn<F: Differentiable>(f: &F, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<f64>, ExplainError> {
    let (nodes, weights) = quad.nodes()?;
    let mut knots = vec![0.0];
    if quad.split_at_kinks {
        knots.extend(f.breakpoints(x).into_iter().filter(|a| *a > 0.0 && *a < 1.0));
    }
    knots.push(1.0);
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(nodes.len() * (knots.len() - 1));
    for k in knots.windows(2) {
        let width = k[1] - k[0];
        points.extend(nodes.iter().zip(&weights).map(|(a, w)| (k[0] + width * a, width * w)));
    }
    let mut avg = vec![0.0; x.len()];
    for chunk in points.chunks(quad.batch) {
        let grads = chunk
            .par_iter()
            .map(|&(alpha, w)| {
                let xa: Vec<f64> = x.iter().map(|v| alpha * v).collect();
                let g = f.gradient(&xa);
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(ExplainError::NonFiniteGradient { alpha });
                }
                Ok((w, g))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (w, g) in grads {
            for (a, gi) in avg.iter_mut().zip(g) {
                *a += w * gi;
            }
        }
    }
    Ok(avg.iter().zip(x).map(|(a, v)| a * v).collect())
}

/// Token attributions of a forecast: coordinate-level Integrated Gradients
/// summed over each token's embedding row.
pub fn integrated_gradients(
    model: &CnnModel,
    input: &SentenceMatrix,
    quad: &QuadratureSpec,
) -> Result<AttributionVector, ExplainError> {
    let (_, rows) = model.forward::<rand::rngs::ThreadRng>(input, None)?;
    let coords = integrated_gradients_fn(model, &rows, quad)?;
    let mut values = vec![0.0; input.max_len()];
    for (slot, chunk) in coords.chunks(model.dim()).enumerate() {
        values[slot] = chunk.iter().sum();
    }
    Ok(AttributionVector {
        values,
        baseline_value: model.predict_rows(&vec![0.0; rows.len()]),
        output: model.predict_rows(&rows),
        method: Method::Ig,
        std_errors: None,
    })
}
