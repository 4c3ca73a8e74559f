use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::input::{LookupTable, SentenceMatrix};
use super::NlpError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub widths: Vec<usize>,
    /// Filters per width.
    pub filters: usize,
    pub dropout: f64,
    pub l2: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub retrain_every: usize,
    pub trainable_embedding: bool,
    pub input_days: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub early_stop_tol: f64,
    pub patience: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            widths: vec![3, 4, 5],
            filters: 3,
            dropout: 0.5,
            l2: 3.0,
            adam: AdamConfig::default(),
            seed: 1,
            retrain_every: 5,
            trainable_embedding: false,
            input_days: 1,
            max_len: 500,
            batch_size: 32,
            epochs: 20,
            early_stop_tol: 1e-6,
            patience: 3,
        }
    }
}

impl CnnConfig {
    /// Identifier used in forecast files, e.g. `nlpml_f3_w3-4-5`.
    pub fn model_id(&self) -> String {
        let w: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let mut id = format!("nlpml_f{}_w{}", self.filters, w.join("-"));
        if self.input_days > 1 {
            id.push_str(&format!("_d{}", self.input_days));
        }
        if self.trainable_embedding {
            id.push_str("_te");
        }
        id
    }

    pub fn validate(&self) -> Result<(), NlpError> {
        if self.widths.is_empty() || self.filters == 0 {
            return Err(NlpError::Config("need at least one width and one filter".into()));
        }
        if let Some(&h) = self.widths.iter().find(|&&h| h == 0 || h > self.max_len) {
            return Err(NlpError::KernelTooLarge { width: h, len: self.max_len });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NlpError::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.batch_size == 0 || self.retrain_every == 0 || self.input_days == 0 {
            return Err(NlpError::Config("batch_size, retrain_every and input_days must be positive".into()));
        }
        Ok(())
    }
}

/// Offsets of every parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub widths: Vec<usize>,
    pub filters: usize,
    pub dim: usize,
    /// Start of the `filters × (h·dim)` kernel block of each width.
    pub kernels: Vec<usize>,
    /// Start of the `filters` bias block of each width.
    pub conv_bias: Vec<usize>,
    pub dense_w: usize,
    pub dense_b: usize,
    pub no_news: usize,
    pub len: usize,
}

impl ParamLayout {
    pub fn new(widths: &[usize], filters: usize, dim: usize) -> Self {
        let mut off = 0;
        let mut kernels = Vec::new();
        let mut conv_bias = Vec::new();
        for &h in widths {
            kernels.push(off);
            off += filters * h * dim;
            conv_bias.push(off);
            off += filters;
        }
        let dense_w = off;
        off += widths.len() * filters;
        let dense_b = off;
        off += 1;
        let no_news = off;
        off += dim;
        Self { widths: widths.to_vec(), filters, dim, kernels, conv_bias, dense_w, dense_b, no_news, len: off }
    }

    pub fn n_pooled(&self) -> usize {
        self.widths.len() * self.filters
    }

    /// Whether parameter `i` is a weight (kernel or dense weight) subject
    /// to the L2 penalty.
    pub fn is_weight(&self, i: usize) -> bool {
        let in_kernel =
            self.widths.iter().enumerate().any(|(j, _)| i >= self.kernels[j] && i < self.conv_bias[j]);
        in_kernel || (i >= self.dense_w && i < self.dense_b)
    }

    pub fn weight_mask(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.is_weight(i)).collect()
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub n_rows: usize,
    /// Pre-activation value of the selected window of each filter.
    pub pre_pool: Vec<f64>,
    /// Start of the selected window; `n_rows` denotes the first all-padding
    /// window.
    pub argmax: Vec<usize>,
    pub pooled: Vec<f64>,
    pub mask: Vec<f64>,
    pub z: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub cfg: CnnConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub table: Arc<LookupTable>,
}

impl CnnModel {
    pub fn zeros(cfg: CnnConfig, table: Arc<LookupTable>) -> Self {
        let layout = ParamLayout::new(&cfg.widths, cfg.filters, table.dim);
        let params = vec![0.0; layout.len];
        Self { cfg, layout, params, table }
    }

    /// Glorot-uniform weights, zero conv biases, output bias `out_bias`,
    /// no-news vector uniform in `±1/sqrt(dim)`.
    pub fn init<R: Rng>(cfg: CnnConfig, table: Arc<LookupTable>, out_bias: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(cfg, table);
        let l = m.layout.clone();
        for (j, &h) in l.widths.iter().enumerate() {
            let fan_in = (h * l.dim) as f64;
            let limit = (6.0 / (fan_in + l.filters as f64)).sqrt();
            for p in &mut m.params[l.kernels[j]..l.conv_bias[j]] {
                *p = rng.gen_range(-limit..limit);
            }
        }
        let limit = (6.0 / (l.n_pooled() as f64 + 1.0)).sqrt();
        for p in &mut m.params[l.dense_w..l.dense_b] {
            *p = rng.gen_range(-limit..limit);
        }
        m.params[l.dense_b] = out_bias;
        let limit = 1.0 / (l.dim as f64).sqrt();
        for p in &mut m.params[l.no_news..l.len] {
            *p = rng.gen_range(-limit..limit);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn no_news_vector(&self) -> &[f64] {
        &self.params[self.layout.no_news..self.layout.len]
    }

    fn kernel(&self, j: usize, f: usize) -> &[f64] {
        let h = self.layout.widths[j];
        let size = h * self.layout.dim;
        let s = self.layout.kernels[j] + f * size;
        &self.params[s..s + size]
    }

    /// Resolved active rows of an input.
    pub fn resolve(&self, input: &SentenceMatrix) -> Vec<f64> {
        input.resolve(&self.table, self.no_news_vector())
    }

    /// Forward pass over `rows` (`n_rows × dim`, the non-padding rows of a
    /// `max_len` input whose remaining rows are zero). Windows lying
    /// entirely in the padding all share one value, so only the first of
    /// them is evaluated; max pooling keeps the first maximal window.
    /// `dropout` switches on training mode.
    pub fn forward_rows<R: Rng + ?Sized>(&self, rows: &[f64], dropout: Option<&mut R>) -> ForwardCache {
        let l = &self.layout;
        let dim = l.dim;
        let n = rows.len() / dim;
        let max_len = self.cfg.max_len;
        let mut pre_pool = Vec::with_capacity(l.n_pooled());
        let mut argmax = Vec::with_capacity(l.n_pooled());
        for (j, &h) in l.widths.iter().enumerate() {
            let n_windows = max_len + 1 - h;
            let real_windows = n.min(n_windows);
            for f in 0..l.filters {
                let w = self.kernel(j, f);
                let b = self.params[l.conv_bias[j] + f];
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for i in 0..real_windows {
                    let span = h.min(n - i);
                    let x = &rows[i * dim..(i + span) * dim];
                    let v = b + dot(&w[..span * dim], x);
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                if n < n_windows && b > best {
                    best = b;
                    best_i = n;
                }
                pre_pool.push(best);
                argmax.push(best_i);
            }
        }
        let pooled: Vec<f64> = pre_pool.iter().map(|&v| v.max(0.0)).collect();
        let mask: Vec<f64> = match dropout {
            Some(rng) if self.cfg.dropout > 0.0 => {
                let keep = 1.0 - self.cfg.dropout;
                (0..pooled.len()).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
            }
            _ => vec![1.0; pooled.len()],
        };
        let wd = &self.params[l.dense_w..l.dense_b];
        let z = self.params[l.dense_b] + pooled.iter().zip(&mask).zip(wd).map(|((p, m), w)| p * m * w).sum::<f64>();
        ForwardCache { n_rows: n, pre_pool, argmax, pooled, mask, z, output: z.max(0.0) }
    }

    /// Checked forward pass on a padded input; returns the cache and the
    /// resolved active rows.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &SentenceMatrix,
        dropout: Option<&mut R>,
    ) -> Result<(ForwardCache, Vec<f64>), NlpError> {
        if input.max_len() != self.cfg.max_len {
            return Err(NlpError::ShapeMismatch(format!(
                "input has {} slots, model expects {}",
                input.max_len(),
                self.cfg.max_len
            )));
        }
        if self.params.len() != self.layout.len {
            return Err(NlpError::ShapeMismatch(format!(
                "{} parameters, layout needs {}",
                self.params.len(),
                self.layout.len
            )));
        }
        let rows = self.resolve(input);
        Ok((self.forward_rows(&rows, dropout), rows))
    }

    /// Evaluation-mode forecast.
    pub fn predict(&self, input: &SentenceMatrix) -> f64 {
        self.forward_rows::<rand::rngs::ThreadRng>(&self.resolve(input), None).output
    }

    pub fn predict_rows(&self, rows: &[f64]) -> f64 {
        self.forward_rows::<rand::rngs::ThreadRng>(rows, None).output
    }

    /// Backpropagates `d_output` (derivative of the objective with respect
    /// to the network output) through the cached pass. Parameter gradients
    /// accumulate into `grads`, input-row gradients into `d_rows`.
    pub fn backprop(
        &self,
        cache: &ForwardCache,
        rows: &[f64],
        d_output: f64,
        mut grads: Option<&mut [f64]>,
        mut d_rows: Option<&mut [f64]>,
    ) {
        if cache.z <= 0.0 {
            return;
        }
        let l = &self.layout;
        let dim = l.dim;
        let n = cache.n_rows;
        let g_z = d_output;
        if let Some(g) = grads.as_deref_mut() {
            g[l.dense_b] += g_z;
            for k in 0..cache.pooled.len() {
                g[l.dense_w + k] += g_z * cache.pooled[k] * cache.mask[k];
            }
        }
        let mut k = 0;
        for (j, &h) in l.widths.iter().enumerate() {
            for f in 0..l.filters {
                let idx = k;
                k += 1;
                if cache.pre_pool[idx] <= 0.0 || cache.mask[idx] == 0.0 {
                    continue;
                }
                let g_p = g_z * self.params[l.dense_w + idx] * cache.mask[idx];
                let i = cache.argmax[idx];
                let span = if i >= n { 0 } else { h.min(n - i) };
                if let Some(g) = grads.as_deref_mut() {
                    g[l.conv_bias[j] + f] += g_p;
                    let ks = l.kernels[j] + f * h * dim;
                    let x = &rows[i.min(n) * dim..(i.min(n) + span) * dim];
                    for (gw, xv) in g[ks..ks + span * dim].iter_mut().zip(x) {
                        *gw += g_p * xv;
                    }
                }
                if let Some(dr) = d_rows.as_deref_mut() {
                    let w = self.kernel(j, f);
                    for (d, wv) in dr[i * dim..(i + span) * dim].iter_mut().zip(&w[..span * dim]) {
                        *d += g_p * wv;
                    }
                }
            }
        }
    }

    /// Output and its gradient with respect to the active rows.
    pub fn input_gradient(&self, rows: &[f64]) -> (f64, Vec<f64>) {
        let cache = self.forward_rows::<rand::rngs::ThreadRng>(rows, None);
        let mut d = vec![0.0; rows.len()];
        self.backprop(&cache, rows, 1.0, None, Some(&mut d));
        (cache.output, d)
    }

    /// Points in `(0, 1)` where the forecast along the straight path
    /// `alpha · rows` changes slope: switches of a pooled maximum between
    /// windows, pooled values crossing zero, and the output layer's ReLU
    /// switching. The forecast is linear between consecutive points.
    pub fn path_breakpoints(&self, rows: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let dim = l.dim;
        let n = rows.len() / dim;
        let mut breaks = Vec::new();
        for (j, &h) in l.widths.iter().enumerate() {
            let n_windows = self.cfg.max_len + 1 - h;
            let real_windows = n.min(n_windows);
            for f in 0..l.filters {
                let w = self.kernel(j, f);
                let b = self.params[l.conv_bias[j] + f];
                // (intercept, slope) of every candidate for the pooled value
                let mut lines: Vec<(f64, f64)> = (0..real_windows)
                    .map(|i| {
                        let span = h.min(n - i);
                        (b, dot(&w[..span * dim], &rows[i * dim..(i + span) * dim]))
                    })
                    .collect();
                if n < n_windows {
                    lines.push((b, 0.0));
                }
                lines.push((0.0, 0.0));
                upper_envelope_breaks(&lines, &mut breaks);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        // the output ReLU switches where z crosses zero inside a linear piece
        let mut knots = vec![0.0];
        knots.extend(breaks.iter().copied());
        knots.push(1.0);
        let z_at = |a: f64| {
            let x: Vec<f64> = rows.iter().map(|v| a * v).collect();
            self.forward_rows::<rand::rngs::ThreadRng>(&x, None).z
        };
        let zs: Vec<f64> = knots.iter().map(|&a| z_at(a)).collect();
        for k in 0..knots.len() - 1 {
            let (z0, z1) = (zs[k], zs[k + 1]);
            if (z0 < 0.0 && z1 > 0.0) || (z0 > 0.0 && z1 < 0.0) {
                breaks.push(knots[k] + (knots[k + 1] - knots[k]) * z0 / (z0 - z1));
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }

    /// `l2 · Σ w²` over kernels and dense weights.
    pub fn l2_penalty(&self) -> f64 {
        let l = &self.layout;
        let mut s = 0.0;
        for j in 0..l.widths.len() {
            s += self.params[l.kernels[j]..l.conv_bias[j]].iter().map(|w| w * w).sum::<f64>();
        }
        s += self.params[l.dense_w..l.dense_b].iter().map(|w| w * w).sum::<f64>();
        self.cfg.l2 * s
    }

    pub fn add_l2_grad(&self, grads: &mut [f64]) {
        let l = &self.layout;
        let c = 2.0 * self.cfg.l2;
        for j in 0..l.widths.len() {
            for i in l.kernels[j]..l.conv_bias[j] {
                grads[i] += c * self.params[i];
            }
        }
        for i in l.dense_w..l.dense_b {
            grads[i] += c * self.params[i];
        }
    }

    /// Squared error plus the L2 penalty for one sample, with gradients
    /// (evaluation mode: no dropout).
    pub fn loss_and_grad(&self, rows: &[f64], target: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let cache = self.forward_rows::<rand::rngs::ThreadRng>(rows, None);
        let mut g = vec![0.0; self.layout.len];
        let mut d = vec![0.0; rows.len()];
        self.backprop(&cache, rows, 2.0 * (cache.output - target), Some(&mut g), Some(&mut d));
        self.add_l2_grad(&mut g);
        ((cache.output - target).powi(2) + self.l2_penalty(), g, d)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Appends the points in `(0, 1)` where the maximum of the lines
/// `c + alpha · s` changes line.
fn upper_envelope_breaks(lines: &[(f64, f64)], out: &mut Vec<f64>) {
    let better = |a: (f64, f64), b: (f64, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 > b.1);
    let mut cur = lines[0];
    for &l in &lines[1..] {
        if better(l, cur) {
            cur = l;
        }
    }
    let mut at = 0.0;
    loop {
        let mut next: Option<(f64, (f64, f64))> = None;
        for &l in lines {
            if l.1 <= cur.1 {
                continue;
            }
            let cross = (cur.0 - l.0) / (l.1 - cur.1);
            if cross <= at {
                continue;
            }
            next = match next {
                Some((c, best)) if c < cross || (c == cross && best.1 >= l.1) => Some((c, best)),
                _ => Some((cross, l)),
            };
        }
        match next {
            Some((c, l)) if c < 1.0 => {
                out.push(c);
                cur = l;
                at = c;
            }
            _ => break,
        }
    }
}

/// Valid 1-D convolution of `rows` (`len × dim`) with one `h × dim` kernel
/// followed by ReLU; the output has `len - h + 1` entries.
pub fn conv_valid(rows: &[f64], dim: usize, kernel: &[f64], bias: f64) -> Result<Vec<f64>, NlpError> {
    let len = rows.len() / dim;
    let h = kernel.len() / dim;
    if h == 0 || h > len {
        return Err(NlpError::KernelTooLarge { width: h, len });
    }
    Ok((0..=len - h).map(|i| (bias + dot(kernel, &rows[i * dim..(i + h) * dim])).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(widths: &[usize], filters: usize, max_len: usize) -> CnnConfig {
        CnnConfig { widths: widths.to_vec(), filters, max_len, ..CnnConfig::default() }
    }

    #[test]
    fn feature_map_lengths() {
        let rows = vec![0.5; 500 * 2];
        for (h, n) in [(3, 498), (4, 497), (5, 496)] {
            assert_eq!(conv_valid(&rows, 2, &vec![1.0; h * 2], 0.0).unwrap().len(), n);
        }
        assert!(matches!(conv_valid(&rows[..4], 2, &[1.0; 6], 0.0), Err(NlpError::KernelTooLarge { .. })));
    }

    #[test]
    fn conv_hand_values() {
        // 6×2 input, 2×2 kernel
        let x = [1.0, 2.0, 0.0, 1.0, -1.0, 3.0, 2.0, 2.0, 0.5, -1.0, 1.0, 1.0];
        let k = [1.0, 0.0, 0.5, -1.0];
        let out = conv_valid(&x, 2, &k, 0.25).unwrap();
        // window i: x[i].k[0..2] + x[i+1].k[2..4] + 0.25
        let hand = [1.0 + (0.0 - 1.0) + 0.25, 0.0 + (-0.5 - 3.0) + 0.25, -1.0 + (1.0 - 2.0) + 0.25, 2.0 + (0.25 + 1.0) + 0.25, 0.5 + (0.5 - 1.0) + 0.25];
        let hand: Vec<f64> = hand.iter().map(|v: &f64| v.max(0.0)).collect();
        assert_eq!(out, hand);
        assert!(conv_valid(&x, 2, &[0.0; 4], -1.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_give_zero() {
        let t = Arc::new(LookupTable::new(4));
        let m = CnnModel::zeros(cfg(&[3, 4, 5], 2, 500), t);
        assert_eq!(m.predict_rows(&[1.0; 12]), 0.0);
    }

    #[test]
    fn parameter_count() {
        let l = ParamLayout::new(&[3, 4, 5], 8, 300);
        assert_eq!(l.len, 8 * (3 * 300 + 1) + 8 * (4 * 300 + 1) + 8 * (5 * 300 + 1) + (3 * 8 + 1) + 300);
        assert_eq!(l.weight_mask().iter().filter(|&&w| w).count(), 8 * 12 * 300 + 24);
    }

    #[test]
    fn dropout_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Arc::new(LookupTable::new(3));
        let c = CnnConfig { dropout: 0.0, ..cfg(&[2], 2, 10) };
        let m = CnnModel::init(c, t, 0.5, &mut rng);
        let rows = [0.1, 0.2, 0.3, -0.1, 0.5, 0.2];
        let a = m.forward_rows(&rows, Some(&mut rng));
        assert_eq!(a.output, m.predict_rows(&rows));
    }
}
