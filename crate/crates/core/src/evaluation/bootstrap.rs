use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::series::ForecastSeries;

use super::losses::{daily_losses, Loss};
use super::EvalError;

fn geometric(avg_block: f64) -> Geometric {
    Geometric::new((1.0 / avg_block).clamp(f64::MIN_POSITIVE, 1.0)).expect("valid probability")
}

/// Stationary bootstrap resample of `0..n`: blocks with geometric lengths of
/// mean `avg_block`, uniform starts, wrapping at the end of the series.
pub fn stationary_bootstrap_indices<R: Rng + ?Sized>(n: usize, avg_block: f64, rng: &mut R) -> Vec<usize> {
    let geo = geometric(avg_block);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let start = rng.gen_range(0..n);
        let len = geo.sample(rng).saturating_add(1);
        let take = (len.min((n - out.len()) as u64)) as usize;
        out.extend((0..take).map(|k| (start + k) % n));
    }
    out
}

/// Draws `count` block lengths from the law used by the resampler.
pub fn block_lengths<R: Rng + ?Sized>(count: usize, avg_block: f64, rng: &mut R) -> Vec<u64> {
    let geo = geometric(avg_block);
    (0..count).map(|_| geo.sample(rng).saturating_add(1)).collect()
}

/// How the bootstrap distribution imposes the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RcNull {
    /// Every benchmark's differential is recentred and the p-value is the
    /// largest per-benchmark exceedance frequency of the observed statistic.
    /// This is the least favourable configuration for a minimum statistic.
    #[default]
    LeastFavourable,
    /// All differentials recentred jointly and the minimum recomputed per
    /// replicate.
    JointMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcConfig {
    pub n_boot: usize,
    pub avg_block: f64,
    pub seed: u64,
    pub null: RcNull,
}

impl Default for RcConfig {
    fn default() -> Self {
        Self { n_boot: 999, avg_block: 5.0, seed: 1, null: RcNull::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealityCheckResult {
    /// `min_k sqrt(n) mean(L_k - L_0)`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_boot: usize,
    pub avg_block: f64,
    /// Mean loss differential per benchmark.
    pub mean_differentials: Vec<f64>,
}

/// Reality check on per-day losses. `candidate[t]` is the candidate's loss
/// and `benchmarks[k][t]` benchmark `k`'s loss on day `t`. Small p-values
/// mean the candidate's loss is below every benchmark's.
pub fn reality_check_losses(
    candidate: &[f64],
    benchmarks: &[Vec<f64>],
    cfg: &RcConfig,
) -> Result<RealityCheckResult, EvalError> {
    let n = candidate.len();
    if n == 0 || benchmarks.is_empty() {
        return Err(EvalError::Empty("reality check needs days and benchmarks".into()));
    }
    if let Some(b) = benchmarks.iter().find(|b| b.len() != n) {
        return Err(EvalError::MisalignedSeries(format!("benchmark has {} days, candidate {n}", b.len())));
    }
    let diffs: Vec<Vec<f64>> =
        benchmarks.iter().map(|b| b.iter().zip(candidate).map(|(l, l0)| l - l0).collect()).collect();
    let means: Vec<f64> = diffs.iter().map(|d| d.iter().sum::<f64>() / n as f64).collect();
    let root_n = (n as f64).sqrt();
    let statistic = means.iter().map(|m| root_n * m).fold(f64::INFINITY, f64::min);

    // per replicate: recentred sqrt(n) (mean* - mean) for every benchmark
    let replicates: Vec<Vec<f64>> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64 + 1);
            let idx = stationary_bootstrap_indices(n, cfg.avg_block, &mut rng);
            diffs
                .iter()
                .zip(&means)
                .map(|(d, m)| root_n * (idx.iter().map(|&i| d[i]).sum::<f64>() / n as f64 - m))
                .collect()
        })
        .collect();
    let boot = cfg.n_boot as f64;
    let p_value = match cfg.null {
        RcNull::JointMinimum => {
            replicates
                .iter()
                .filter(|z| z.iter().copied().fold(f64::INFINITY, f64::min) >= statistic)
                .count() as f64
                / boot
        }
        RcNull::LeastFavourable => (0..benchmarks.len())
            .map(|k| replicates.iter().filter(|z| z[k] >= statistic).count() as f64 / boot)
            .fold(0.0, f64::max),
    };
    Ok(RealityCheckResult { statistic, p_value, n_boot: cfg.n_boot, avg_block: cfg.avg_block, mean_differentials: means })
}

/// Reality check of `candidate` against `benchmarks` under `loss`,
/// optionally restricted to `day_subset` (positions in the series).
pub fn reality_check(
    candidate: &ForecastSeries,
    benchmarks: &[ForecastSeries],
    loss: Loss,
    day_subset: Option<&[usize]>,
    cfg: &RcConfig,
) -> Result<RealityCheckResult, EvalError> {
    for b in benchmarks {
        if b.dates != candidate.dates {
            return Err(EvalError::MisalignedSeries(format!(
                "benchmark {} dates differ from candidate {}",
                b.model_id, candidate.model_id
            )));
        }
    }
    let pick = |s: &ForecastSeries| match day_subset {
        Some(idx) => s.subset(idx),
        None => s.clone(),
    };
    let c = pick(candidate);
    let l0 = daily_losses(&c.actual, &c.forecast, loss)?;
    let lk = benchmarks
        .iter()
        .map(|b| {
            let b = pick(b);
            daily_losses(&b.actual, &b.forecast, loss)
        })
        .collect::<Result<Vec<_>, _>>()?;
    reality_check_losses(&l0, &lk, cfg)
}
