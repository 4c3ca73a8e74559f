use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::nlpml::{CnnModel, SentenceMatrix};

use super::{AttributionVector, ExplainError, Method};

/// Largest token count for coalition enumeration.
pub const MAX_EXACT_TOKENS: usize = 12;

/// Exact Shapley values of the set function `f` over `n` players, from all
/// `2^n` coalitions (`mask` bit `i` set means player `i` is present).
pub fn shapley_exact_fn<F>(n: usize, f: F) -> Result<Vec<f64>, ExplainError>
where
    F: Fn(u32) -> f64 + Sync,
{
    if n > MAX_EXACT_TOKENS {
        return Err(ExplainError::TooManyTokens { n, cap: MAX_EXACT_TOKENS });
    }
    let values: Vec<f64> = (0..1u32 << n).into_par_iter().map(&f).collect();
    // weight |S|! (n-|S|-1)! / n! for a coalition of size |S| without i
    let mut fact = vec![1.0; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - s - 1] / fact[n]).collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << n {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(phi)
}

/// Permutation-sampling Shapley estimates and their standard errors.
pub fn shapley_sampled_fn<F, R>(n: usize, n_permutations: usize, rng: &mut R, f: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(u32) -> f64 + Sync,
    R: Rng + ?Sized,
{
    if n == 0 || n_permutations == 0 {
        return (vec![0.0; n], vec![0.0; n]);
    }
    assert!(n <= 32, "coalition masks hold at most 32 players");
    let perms: Vec<Vec<usize>> = (0..n_permutations)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    let contribs: Vec<Vec<f64>> = perms
        .par_iter()
        .map(|perm| {
            let mut out = vec![0.0; n];
            let mut mask = 0u32;
            let mut prev = f(mask);
            for &i in perm {
                mask |= 1 << i;
                let cur = f(mask);
                out[i] = cur - prev;
                prev = cur;
            }
            out
        })
        .collect();
    let k = n_permutations as f64;
    let mut mean = vec![0.0; n];
    for c in &contribs {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v / k;
        }
    }
    let se = (0..n)
        .map(|i| {
            if n_permutations < 2 {
                return 0.0;
            }
            let ss: f64 = contribs.iter().map(|c| (c[i] - mean[i]).powi(2)).sum();
            (ss / (k - 1.0) / k).sqrt()
        })
        .collect();
    (mean, se)
}

/// Forecast with the real tokens outside `mask` replaced by the zero
/// padding row.
fn coalition_value(model: &CnnModel, rows: &[f64], mask: u32) -> f64 {
    let dim = model.dim();
    let mut x = rows.to_vec();
    for (i, chunk) in x.chunks_mut(dim).enumerate() {
        if mask & (1 << i) == 0 {
            chunk.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    model.predict_rows(&x)
}

fn player_rows(model: &CnnModel, input: &SentenceMatrix) -> Result<Vec<f64>, ExplainError> {
    Ok(model.forward::<rand::rngs::ThreadRng>(input, None)?.1)
}

pub fn shapley_exact(model: &CnnModel, input: &SentenceMatrix) -> Result<AttributionVector, ExplainError> {
    let rows = player_rows(model, input)?;
    let n = rows.len() / model.dim();
    let phi = shapley_exact_fn(n, |m| coalition_value(model, &rows, m))?;
    let mut values = vec![0.0; input.max_len()];
    values[..n].copy_from_slice(&phi);
    Ok(AttributionVector {
        values,
        baseline_value: coalition_value(model, &rows, 0),
        output: model.predict_rows(&rows),
        method: Method::ShapleyExact,
        std_errors: None,
    })
}

pub fn shapley_sampled<R: Rng + ?Sized>(
    model: &CnnModel,
    input: &SentenceMatrix,
    n_permutations: usize,
    rng: &mut R,
) -> Result<AttributionVector, ExplainError> {
    let rows = player_rows(model, input)?;
    let n = rows.len() / model.dim();
    if n > 32 {
        return Err(ExplainError::TooManyTokens { n, cap: 32 });
    }
    let (phi, se) = shapley_sampled_fn(n, n_permutations, rng, |m| coalition_value(model, &rows, m));
    let mut values = vec![0.0; input.max_len()];
    values[..n].copy_from_slice(&phi);
    let mut std_errors = vec![0.0; input.max_len()];
    std_errors[..n].copy_from_slice(&se);
    Ok(AttributionVector {
        values,
        baseline_value: coalition_value(model, &rows, 0),
        output: model.predict_rows(&rows),
        method: Method::ShapleySampled,
        std_errors: Some(std_errors),
    })
}
