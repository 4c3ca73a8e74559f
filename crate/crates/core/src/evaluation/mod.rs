//! Forecast scoring: losses, normal/jump day split, Δ aggregates,
//! stationary-bootstrap reality check and the ensemble forecast.

mod bootstrap;
mod losses;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::ForecastSeries;
use crate::stats::{mean, median, quantile};

pub use bootstrap::{
    block_lengths, reality_check, reality_check_losses, stationary_bootstrap_indices, RcConfig, RcNull,
    RealityCheckResult,
};
pub use losses::{daily_losses, mda, mse, qlike, qlike_pointwise, score, Loss, MdaMode};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("forecast must be positive for QLIKE (day {day}: {value})")]
    NonPositiveForecast { day: usize, value: f64 },
    #[error("actual RV must be positive for QLIKE (day {day}: {value})")]
    NonPositiveActual { day: usize, value: f64 },
    #[error("series too short: {0} days")]
    TooShort(usize),
    #[error("misaligned series: {0}")]
    MisalignedSeries(String),
    #[error("empty input: {0}")]
    Empty(String),
}

/// Indices of normal and jump days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySplit {
    pub normal: Vec<usize>,
    pub jump: Vec<usize>,
}

/// Jump threshold `Q3 + 1.5 IQR` of `reference` (type-7 quantiles).
pub fn jump_threshold(reference: &[f64]) -> f64 {
    let q1 = quantile(reference, 0.25);
    let q3 = quantile(reference, 0.75);
    q3 + 1.5 * (q3 - q1)
}

/// Splits days using quantiles of the evaluated sample itself.
pub fn classify_days(actual: &[f64]) -> DaySplit {
    classify_days_against(actual, actual)
}

/// Splits `actual` using quantiles computed on `reference` (for instance a
/// training window).
pub fn classify_days_against(actual: &[f64], reference: &[f64]) -> DaySplit {
    let thr = jump_threshold(reference);
    let (jump, normal): (Vec<usize>, Vec<usize>) = (0..actual.len()).partition(|&i| actual[i] > thr);
    DaySplit { normal, jump }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub avg: f64,
    pub med: f64,
    /// `(ticker, model loss - benchmark loss)`.
    pub per_ticker: Vec<(String, f64)>,
}

/// Per-ticker loss differences `model - benchmark`, matched by ticker,
/// with their mean and median. Negative is better for MSE and QLIKE,
/// positive is better for MDA.
pub fn delta_aggregate(
    models: &[ForecastSeries],
    benchmarks: &[ForecastSeries],
    loss: Loss,
) -> Result<DeltaSummary, EvalError> {
    if models.is_empty() {
        return Err(EvalError::Empty("no model series".into()));
    }
    let mut per_ticker = Vec::with_capacity(models.len());
    for m in models {
        let b = benchmarks
            .iter()
            .find(|b| b.ticker == m.ticker)
            .ok_or_else(|| EvalError::MisalignedSeries(format!("no benchmark for ticker {}", m.ticker)))?;
        if b.dates != m.dates {
            return Err(EvalError::MisalignedSeries(format!("dates differ for ticker {}", m.ticker)));
        }
        per_ticker.push((m.ticker.clone(), score(m, loss)? - score(b, loss)?));
    }
    let d: Vec<f64> = per_ticker.iter().map(|x| x.1).collect();
    Ok(DeltaSummary { avg: mean(&d), med: median(&d), per_ticker })
}

/// Element-wise mean of two forecasts for the same ticker and dates.
pub fn ensemble_mean(a: &ForecastSeries, b: &ForecastSeries) -> Result<ForecastSeries, EvalError> {
    if a.ticker != b.ticker {
        return Err(EvalError::MisalignedSeries(format!("tickers {} and {}", a.ticker, b.ticker)));
    }
    if a.dates != b.dates {
        return Err(EvalError::MisalignedSeries("dates differ".into()));
    }
    if a.actual != b.actual {
        return Err(EvalError::MisalignedSeries("actual RV differs".into()));
    }
    Ok(ForecastSeries {
        ticker: a.ticker.clone(),
        model_id: format!("ensemble({}+{})", a.model_id, b.model_id),
        dates: a.dates.clone(),
        actual: a.actual.clone(),
        forecast: a.forecast.iter().zip(&b.forecast).map(|(x, y)| (x + y) / 2.0).collect(),
    })
}
