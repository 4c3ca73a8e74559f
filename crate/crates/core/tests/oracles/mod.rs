//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voltext::embedding::sgns::{ns_loss, ns_loss_grad};

pub fn rand_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Central differences of the loss with respect to every coordinate of
/// every row, compared with the analytic gradient.
pub fn sgns_gradient_error(rng: &mut ChaCha8Rng, n_inputs: usize, scale: f64) -> f64 {
    let dim = rng.gen_range(2..8);
    let k = rng.gen_range(1..6);
    let mut inputs: Vec<Vec<f64>> = (0..n_inputs).map(|_| rand_vec(rng, dim)).collect();
    let mut pos = rand_vec(rng, dim);
    let mut negs: Vec<Vec<f64>> = (0..k).map(|_| rand_vec(rng, dim)).collect();
    let loss = |i: &[Vec<f64>], p: &[f64], n: &[Vec<f64>]| {
        let ir: Vec<&[f64]> = i.iter().map(Vec::as_slice).collect();
        let nr: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
        ns_loss(&ir, scale, p, &nr)
    };
    let g = {
        let ir: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let nr: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        ns_loss_grad(&ir, scale, &pos, &nr)
    };
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for r in 0..n_inputs {
        for c in 0..dim {
            let orig = inputs[r][c];
            inputs[r][c] = orig + h;
            let up = loss(&inputs, &pos, &negs);
            inputs[r][c] = orig - h;
            let dn = loss(&inputs, &pos, &negs);
            inputs[r][c] = orig;
            worst = worst.max(rel_err(g.input_rows[r][c], (up - dn) / (2.0 * h)));
        }
    }
    for c in 0..dim {
        let orig = pos[c];
        pos[c] = orig + h;
        let up = loss(&inputs, &pos, &negs);
        pos[c] = orig - h;
        let dn = loss(&inputs, &pos, &negs);
        pos[c] = orig;
        worst = worst.max(rel_err(g.positive[c], (up - dn) / (2.0 * h)));
    }
    for j in 0..k {
        for c in 0..dim {
            let orig = negs[j][c];
            negs[j][c] = orig + h;
            let up = loss(&inputs, &pos, &negs);
            negs[j][c] = orig - h;
            let dn = loss(&inputs, &pos, &negs);
            negs[j][c] = orig;
            worst = worst.max(rel_err(g.negatives[j][c], (up - dn) / (2.0 * h)));
        }
    }
    worst
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * t;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}


/// CNN forecast computed the slow way: materialise the full padded
/// `max_len × dim` input, evaluate every valid window of every filter, take
/// the global max, then the dense ReLU layer.
pub fn cnn_forward_bruteforce(model: &voltext::nlpml::CnnModel, active_rows: &[f64]) -> f64 {
    let dim = model.dim();
    let len = model.cfg.max_len;
    let mut x = vec![0.0; len * dim];
    x[..active_rows.len()].copy_from_slice(active_rows);
    let p = &model.params;
    let f = model.cfg.filters;
    let mut off = 0;
    let mut pooled = Vec::new();
    for &h in &model.cfg.widths {
        let kernels = &p[off..off + f * h * dim];
        let biases = &p[off + f * h * dim..off + f * h * dim + f];
        off += f * h * dim + f;
        for k in 0..f {
            let w = &kernels[k * h * dim..(k + 1) * h * dim];
            let mut best = f64::NEG_INFINITY;
            for i in 0..=len - h {
                let mut s = biases[k];
                for r in 0..h {
                    for c in 0..dim {
                        s += w[r * dim + c] * x[(i + r) * dim + c];
                    }
                }
                best = best.max(s.max(0.0));
            }
            pooled.push(best);
        }
    }
    let n = pooled.len();
    let z = p[off + n] + pooled.iter().zip(&p[off..off + n]).map(|(a, b)| a * b).sum::<f64>();
    z.max(0.0)
}

/// Objective `(F - y)^2 + l2 Σ w^2` using the brute-force forward pass.
pub fn cnn_objective(model: &voltext::nlpml::CnnModel, rows: &[f64], target: f64) -> f64 {
    let dim = model.dim();
    let f = model.cfg.filters;
    let mut off = 0;
    let mut sq = 0.0;
    for &h in &model.cfg.widths {
        sq += model.params[off..off + f * h * dim].iter().map(|w| w * w).sum::<f64>();
        off += f * h * dim + f;
    }
    let n = model.cfg.widths.len() * f;
    sq += model.params[off..off + n].iter().map(|w| w * w).sum::<f64>();
    (cnn_forward_bruteforce(model, rows) - target).powi(2) + model.cfg.l2 * sq
}

/// Random model whose every pre-activation sits well inside the positive
/// region: positive conv biases and dense weights, positive output bias.
pub fn kink_free_cnn(rng: &mut ChaCha8Rng, widths: &[usize], filters: usize, dim: usize, max_len: usize) -> voltext::nlpml::CnnModel {
    use std::sync::Arc;
    use voltext::nlpml::*;
    let cfg = CnnConfig { widths: widths.to_vec(), filters, max_len, l2: 0.01, dropout: 0.0, ..CnnConfig::default() };
    let mut m = CnnModel::zeros(cfg, Arc::new(LookupTable::new(dim)));
    let l = m.layout.clone();
    for j in 0..l.widths.len() {
        for p in &mut m.params[l.kernels[j]..l.conv_bias[j]] {
            *p = rng.gen_range(-0.5..0.5);
        }
        for p in &mut m.params[l.conv_bias[j]..l.conv_bias[j] + filters] {
            *p = rng.gen_range(0.2..0.6);
        }
    }
    for p in &mut m.params[l.dense_w..l.dense_b] {
        *p = rng.gen_range(0.1..1.0);
    }
    m.params[l.dense_b] = 0.5;
    m
}

/// Largest relative error between analytic and central-difference
/// gradients over `n_coords` random parameter and input coordinates.
pub fn cnn_gradient_error(seed: u64, n_coords: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..6);
    let max_len = rng.gen_range(8..16);
    let mut model = kink_free_cnn(&mut rng, &[2, 3, 4], 3, dim, max_len);
    let n = rng.gen_range(1..=max_len);
    let mut rows: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target = rng.gen_range(0.0..2.0);
    let (_, g, d) = model.loss_and_grad(&rows, target);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..n_coords {
        if rng.gen_bool(0.7) {
            let i = rng.gen_range(0..model.layout.no_news);
            let orig = model.params[i];
            model.params[i] = orig + h;
            let up = cnn_objective(&model, &rows, target);
            model.params[i] = orig - h;
            let dn = cnn_objective(&model, &rows, target);
            model.params[i] = orig;
            worst = worst.max(rel_err(g[i], (up - dn) / (2.0 * h)));
        } else {
            let i = rng.gen_range(0..rows.len());
            let orig = rows[i];
            rows[i] = orig + h;
            let up = cnn_objective(&model, &rows, target);
            rows[i] = orig - h;
            let dn = cnn_objective(&model, &rows, target);
            rows[i] = orig;
            worst = worst.max(rel_err(d[i], (up - dn) / (2.0 * h)));
        }
    }
    worst
}

/// Shapley values by enumerating all `n!` orderings.
pub fn shapley_by_permutations(n: usize, f: &dyn Fn(u32) -> f64) -> Vec<f64> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut perms = Vec::new();
    if n == 0 {
        return Vec::new();
    }
    heap(n, &mut (0..n).collect(), &mut perms);
    let mut phi = vec![0.0; n];
    for p in &perms {
        let mut mask = 0u32;
        for &i in p {
            let before = f(mask);
            mask |= 1 << i;
            phi[i] += f(mask) - before;
        }
    }
    let k = perms.len() as f64;
    phi.iter().map(|v| v / k).collect()
}

/// Toy corpus with a vocabulary of `vocab` random vectors in `dim`
/// dimensions whose next-day target rises with the count of token 0.
pub fn toy_training_set(
    seed: u64,
    n_days: usize,
    vocab: usize,
    dim: usize,
    max_len: usize,
) -> (std::sync::Arc<voltext::nlpml::LookupTable>, Vec<voltext::nlpml::SentenceMatrix>, Vec<f64>) {
    use voltext::nlpml::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = LookupTable::new(dim);
    let words: Vec<String> = (0..vocab).map(|i| format!("tok{i}")).collect();
    for w in &words {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        t.push(w, &v);
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..n_days {
        let k = rng.gen_range(1..max_len);
        let toks: Vec<String> = (0..k).map(|_| words[rng.gen_range(0..vocab)].clone()).collect();
        let hits = toks.iter().filter(|w| *w == &words[0]).count() as f64;
        inputs.push(build_day_input(&toks, &t, max_len));
        targets.push(1.0 + 2.0 * hits + rng.gen_range(0.0..0.3));
    }
    (std::sync::Arc::new(t), inputs, targets)
}

/// Kolmogorov-Smirnov distance between `xs` and the uniform law on [0, 1].
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Critical KS distance at the 1% level (Stephens' finite-sample form).
pub fn ks_critical_1pct(n: usize) -> f64 {
    let r = (n as f64).sqrt();
    1.628 / (r + 0.12 + 0.11 / r)
}

fn exp_draws(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect()
}

/// Reality checks where the candidate's daily loss is half the average of
/// four benchmark losses; returns how many of `runs` reject at 5%.
pub fn rc_dominated_rejections(runs: u64, n_days: usize) -> usize {
    use voltext::evaluation::{reality_check_losses, RcConfig};
    (0..runs)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let bench: Vec<Vec<f64>> = (0..4).map(|_| exp_draws(&mut rng, n_days)).collect();
            let cand: Vec<f64> = (0..n_days).map(|t| 0.5 * bench.iter().map(|b| b[t]).sum::<f64>() / 4.0).collect();
            let cfg = RcConfig { seed, ..RcConfig::default() };
            reality_check_losses(&cand, &bench, &cfg).unwrap().p_value < 0.05
        })
        .count()
}

/// Reality-check p-values when candidate and benchmark have equal
/// expected loss.
pub fn rc_null_pvalues(runs: u64, n_days: usize) -> Vec<f64> {
    use voltext::evaluation::{reality_check_losses, RcConfig};
    (0..runs)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
            let bench = vec![exp_draws(&mut rng, n_days)];
            let cand = exp_draws(&mut rng, n_days);
            let cfg = RcConfig { seed, ..RcConfig::default() };
            reality_check_losses(&cand, &bench, &cfg).unwrap().p_value
        })
        .collect()
}
