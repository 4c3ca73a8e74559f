use serde::{Deserialize, Serialize};

use crate::series::ForecastSeries;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    Qlike,
    Mda(MdaMode),
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Mse => "mse",
            Loss::Qlike => "qlike",
            Loss::Mda(_) => "mda",
        }
    }

    /// Whether larger scores are better (MDA) or worse (losses).
    pub fn higher_is_better(self) -> bool {
        matches!(self, Loss::Mda(_))
    }
}

impl std::str::FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Loss::Mse),
            "qlike" => Ok(Loss::Qlike),
            "mda" => Ok(Loss::Mda(MdaMode::PreviousActual)),
            "mda-forecast" => Ok(Loss::Mda(MdaMode::PreviousForecast)),
            other => Err(format!("unknown loss {other:?} (mse, qlike, mda, mda-forecast)")),
        }
    }
}

/// Reference point for the forecast direction in MDA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdaMode {
    /// `sign(f_t - a_{t-1})` against `sign(a_t - a_{t-1})`.
    #[default]
    PreviousActual,
    /// `sign(f_t - f_{t-1})` against `sign(a_t - a_{t-1})`.
    PreviousForecast,
}

pub fn mse(actual: &[f64], forecast: &[f64]) -> f64 {
    actual.iter().zip(forecast).map(|(a, f)| (a - f).powi(2)).sum::<f64>() / actual.len() as f64
}

pub fn qlike_pointwise(actual: f64, forecast: f64) -> f64 {
    let x = actual / forecast;
    x - x.ln() - 1.0
}

pub fn qlike(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    Ok(qlike_daily(actual, forecast)?.iter().sum::<f64>() / actual.len() as f64)
}

fn qlike_daily(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>, EvalError> {
    actual
        .iter()
        .zip(forecast)
        .enumerate()
        .map(|(day, (&a, &f))| {
            if f <= 0.0 || f.is_nan() {
                Err(EvalError::NonPositiveForecast { day, value: f })
            } else if a <= 0.0 || a.is_nan() {
                Err(EvalError::NonPositiveActual { day, value: a })
            } else {
                Ok(qlike_pointwise(a, f))
            }
        })
        .collect()
}

/// 1 when the forecast direction matches the realized direction. A zero
/// change counts as a match only when both changes are zero.
fn direction_hits(actual: &[f64], forecast: &[f64], mode: MdaMode) -> Vec<f64> {
    (1..actual.len())
        .map(|t| {
            let real = actual[t] - actual[t - 1];
            let pred = match mode {
                MdaMode::PreviousActual => forecast[t] - actual[t - 1],
                MdaMode::PreviousForecast => forecast[t] - forecast[t - 1],
            };
            let same = if real == 0.0 || pred == 0.0 { real == pred } else { real.signum() == pred.signum() };
            if same {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn mda(actual: &[f64], forecast: &[f64], mode: MdaMode) -> Result<f64, EvalError> {
    if actual.len() < 2 {
        return Err(EvalError::TooShort(actual.len()));
    }
    let hits = direction_hits(actual, forecast, mode);
    Ok(hits.iter().sum::<f64>() / hits.len() as f64)
}

/// Mean loss (or MDA) of a series.
pub fn score(s: &ForecastSeries, loss: Loss) -> Result<f64, EvalError> {
    if s.is_empty() {
        return Err(EvalError::Empty(format!("series {}", s.model_id)));
    }
    match loss {
        Loss::Mse => Ok(mse(&s.actual, &s.forecast)),
        Loss::Qlike => qlike(&s.actual, &s.forecast),
        Loss::Mda(mode) => mda(&s.actual, &s.forecast, mode),
    }
}

/// Per-day losses, oriented so that lower is better. For MDA this is
/// `1 - hit` and the first day (no previous actual) is dropped.
pub fn daily_losses(actual: &[f64], forecast: &[f64], loss: Loss) -> Result<Vec<f64>, EvalError> {
    match loss {
        Loss::Mse => Ok(actual.iter().zip(forecast).map(|(a, f)| (a - f).powi(2)).collect()),
        Loss::Qlike => qlike_daily(actual, forecast),
        Loss::Mda(mode) => {
            if actual.len() < 2 {
                return Err(EvalError::TooShort(actual.len()));
            }
            Ok(direction_hits(actual, forecast, mode).into_iter().map(|h| 1.0 - h).collect())
        }
    }
}
