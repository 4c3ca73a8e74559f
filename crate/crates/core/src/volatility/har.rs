//! HAR-family regressions and the rolling out-of-sample protocol.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::series::ForecastSeries;
use crate::stats::mean;

use super::{DailyVolRecord, VolError};

pub const WEEK: usize = 7;
pub const MONTH: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarModel {
    Ar1,
    Har,
    HarJ,
    Char,
    Shar,
    Arq,
    Harq,
    HarqF,
}

impl HarModel {
    pub const ALL: [HarModel; 8] = [
        HarModel::Ar1,
        HarModel::Har,
        HarModel::HarJ,
        HarModel::Char,
        HarModel::Shar,
        HarModel::Arq,
        HarModel::Harq,
        HarModel::HarqF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HarModel::Ar1 => "ar1",
            HarModel::Har => "har",
            HarModel::HarJ => "harj",
            HarModel::Char => "char",
            HarModel::Shar => "shar",
            HarModel::Arq => "arq",
            HarModel::Harq => "harq",
            HarModel::HarqF => "harqf",
        }
    }

    /// Number of regressors including the intercept.
    pub fn n_features(self) -> usize {
        match self {
            HarModel::Ar1 => 2,
            HarModel::Arq => 3,
            HarModel::Har | HarModel::Char => 4,
            HarModel::HarJ | HarModel::Shar | HarModel::Harq => 5,
            HarModel::HarqF => 7,
        }
    }
}

impl fmt::Display for HarModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HarModel {
    type Err = VolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        HarModel::ALL.into_iter().find(|m| m.name() == key).ok_or_else(|| VolError::UnknownModel(s.to_string()))
    }
}

fn trailing_mean(records: &[DailyVolRecord], t: usize, len: usize, f: impl Fn(&DailyVolRecord) -> f64) -> f64 {
    records[t + 1 - len..=t].iter().map(f).sum::<f64>() / len as f64
}

/// Regressors (intercept first) for forecasting the RV of day `t + 1` from
/// information up to and including day `t`. Weekly and monthly terms are
/// trailing means that include day `t`.
pub fn build_har_features(records: &[DailyVolRecord], model: HarModel, t: usize) -> Result<Vec<f64>, VolError> {
    if t + 1 < MONTH || t >= records.len() {
        return Err(VolError::InsufficientHistory { need: MONTH, got: (t + 1).min(records.len()) });
    }
    let r = &records[t];
    let rv_w = trailing_mean(records, t, WEEK, |d| d.rv);
    let rv_m = trailing_mean(records, t, MONTH, |d| d.rv);
    let rq_sqrt = r.rq.sqrt();
    Ok(match model {
        HarModel::Ar1 => vec![1.0, r.rv],
        HarModel::Har => vec![1.0, r.rv, rv_w, rv_m],
        HarModel::HarJ => vec![1.0, r.rv, rv_w, rv_m, r.jump],
        HarModel::Char => vec![
            1.0,
            r.bpv,
            trailing_mean(records, t, WEEK, |d| d.bpv),
            trailing_mean(records, t, MONTH, |d| d.bpv),
        ],
        HarModel::Shar => vec![1.0, r.rv_pos, r.rv_neg, rv_w, rv_m],
        HarModel::Arq => vec![1.0, r.rv, r.rv * rq_sqrt],
        HarModel::Harq => vec![1.0, r.rv, r.rv * rq_sqrt, rv_w, rv_m],
        HarModel::HarqF => {
            let rq_w = trailing_mean(records, t, WEEK, |d| d.rq).sqrt();
            let rq_m = trailing_mean(records, t, MONTH, |d| d.rq).sqrt();
            vec![1.0, r.rv, r.rv * rq_sqrt, rv_w, rv_w * rq_w, rv_m, rv_m * rq_m]
        }
    })
}

/// Least squares via SVD; rank-deficient designs get the minimum-norm
/// solution. With `strict`, an all-zero column is an error instead.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], strict: bool) -> Result<Vec<f64>, VolError> {
    if x.nrows() != y.len() {
        return Err(VolError::ShapeMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if x.nrows() < x.ncols() {
        return Err(VolError::ShapeMismatch(format!("{} rows < {} columns", x.nrows(), x.ncols())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(VolError::NonFinite("design or target".into()));
    }
    if strict {
        if let Some(c) = (0..x.ncols()).find(|&c| x.column(c).iter().all(|&v| v == 0.0)) {
            return Err(VolError::DegenerateDesign { column: c });
        }
    }
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * f64::EPSILON * x.nrows().max(x.ncols()) as f64;
    let beta = svd.solve(&DVector::from_column_slice(y), eps).map_err(|e| VolError::ShapeMismatch(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

pub fn predict(beta: &[f64], x: &[f64]) -> f64 {
    beta.iter().zip(x).map(|(b, v)| b * v).sum()
}

/// Out-of-range forecasts are replaced by the training mean.
pub fn insanity_filter(forecast: f64, train: &[f64]) -> f64 {
    let lo = train.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !forecast.is_finite() || forecast > hi || forecast < lo {
        mean(train)
    } else {
        forecast
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingProtocol {
    pub train_len: usize,
    pub oos_len: usize,
}

impl Default for RollingProtocol {
    fn default() -> Self {
        Self { train_len: 2046, oos_len: 300 }
    }
}

impl RollingProtocol {
    /// Minimum record count: the first training target still needs a full
    /// month of history behind it.
    pub fn required_len(&self) -> usize {
        self.train_len + self.oos_len + MONTH
    }

    /// Record indices of the out-of-sample days.
    pub fn oos_range(&self, n: usize) -> std::ops::Range<usize> {
        n - self.oos_len..n
    }

    pub fn check(&self, n: usize) -> Result<(), VolError> {
        if n < self.required_len() {
            return Err(VolError::InsufficientHistory { need: self.required_len(), got: n });
        }
        Ok(())
    }
}

/// One fitted window: coefficients plus training-target range.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub beta: Vec<f64>,
    pub train_targets: Vec<f64>,
}

/// Fit the model whose training pairs are `(x_t, rv_{t+1})` for target days
/// `d - train_len .. d`.
pub fn fit_window(
    records: &[DailyVolRecord],
    model: HarModel,
    d: usize,
    train_len: usize,
) -> Result<WindowFit, VolError> {
    let first_target = d.checked_sub(train_len).filter(|&f| f >= MONTH).ok_or(VolError::InsufficientHistory {
        need: train_len + MONTH,
        got: d,
    })?;
    let k = model.n_features();
    let mut x = DMatrix::zeros(train_len, k);
    let mut y = Vec::with_capacity(train_len);
    for (row, target) in (first_target..d).enumerate() {
        let f = build_har_features(records, model, target - 1)?;
        for (c, v) in f.into_iter().enumerate() {
            x[(row, c)] = v;
        }
        y.push(records[target].rv);
    }
    let beta = ols_fit(&x, &y, false)?;
    Ok(WindowFit { beta, train_targets: y })
}

/// Refit every day on the trailing window and forecast one step ahead; each
/// forecast goes through the insanity filter.
pub fn rolling_forecast(
    records: &[DailyVolRecord],
    model: HarModel,
    protocol: &RollingProtocol,
    ticker: &str,
) -> Result<ForecastSeries, VolError> {
    protocol.check(records.len())?;
    let days: Vec<usize> = protocol.oos_range(records.len()).collect();
    let forecasts = days
        .par_iter()
        .map(|&d| {
            let fit = fit_window(records, model, d, protocol.train_len)?;
            let x = build_har_features(records, model, d - 1)?;
            Ok(insanity_filter(predict(&fit.beta, &x), &fit.train_targets))
        })
        .collect::<Result<Vec<f64>, VolError>>()?;
    Ok(ForecastSeries {
        ticker: ticker.to_string(),
        model_id: model.name().to_string(),
        dates: days.iter().map(|&d| records[d].date).collect(),
        actual: days.iter().map(|&d| records[d].rv).collect(),
        forecast: forecasts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn records_from_rv(rv: &[f64]) -> Vec<DailyVolRecord> {
        let d0 = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        rv.iter()
            .enumerate()
            .map(|(i, &v)| DailyVolRecord {
                date: d0 + chrono::Duration::days(i as i64),
                rv: v,
                bpv: v * 0.9,
                jump: v * 0.1,
                rv_pos: v * 0.4,
                rv_neg: v * 0.6,
                rq: v * v,
            })
            .collect()
    }

    #[test]
    fn constant_history_features() {
        let recs = records_from_rv(&[2.5; 30]);
        let f = build_har_features(&recs, HarModel::Har, 25).unwrap();
        assert_eq!(f, vec![1.0, 2.5, 2.5, 2.5]);
        assert!(matches!(build_har_features(&recs, HarModel::Har, 19), Err(VolError::InsufficientHistory { .. })));
        assert!(build_har_features(&recs, HarModel::Har, 20).is_ok());
    }

    #[test]
    fn weekly_mean_of_last_seven() {
        let rv: Vec<f64> = (0..22).map(|i| (i * i) as f64).collect();
        let recs = records_from_rv(&rv);
        let f = build_har_features(&recs, HarModel::Har, 21).unwrap();
        let hand = (15..=21).map(|i| (i * i) as f64).sum::<f64>() / 7.0;
        assert!((f[2] - hand).abs() < 1e-12);
        let month = (1..=21).map(|i| (i * i) as f64).sum::<f64>() / 21.0;
        assert!((f[3] - month).abs() < 1e-12);
    }

    #[test]
    fn char_uses_bpv_only() {
        let rv: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
        let mut recs = records_from_rv(&rv);
        let f1 = build_har_features(&recs, HarModel::Char, 24).unwrap();
        for r in &mut recs {
            r.rv *= 10.0;
        }
        assert_eq!(build_har_features(&recs, HarModel::Char, 24).unwrap(), f1);
    }

    #[test]
    fn feature_counts() {
        let recs = records_from_rv(&[1.0; 25]);
        for m in HarModel::ALL {
            assert_eq!(build_har_features(&recs, m, 24).unwrap().len(), m.n_features(), "{m}");
            assert_eq!(m.name().parse::<HarModel>().unwrap(), m);
        }
        assert_eq!("HAR-J".parse::<HarModel>().unwrap(), HarModel::HarJ);
        assert_eq!("HARQ-F".parse::<HarModel>().unwrap(), HarModel::HarqF);
    }

    #[test]
    fn ols_exact_and_intercept() {
        let x = DMatrix::from_fn(10, 3, |i, j| if j == 0 { 1.0 } else { ((i * 7 + j * 3) % 11) as f64 });
        let y: Vec<f64> = (0..10).map(|i| 0.5 + 2.0 * x[(i, 1)] - 1.5 * x[(i, 2)]).collect();
        let b = ols_fit(&x, &y, true).unwrap();
        for i in 0..10 {
            assert!((predict(&b, &[1.0, x[(i, 1)], x[(i, 2)]]) - y[i]).abs() < 1e-10);
        }
        let ones = DMatrix::from_element(5, 1, 1.0);
        let b = ols_fit(&ones, &[1.0, 2.0, 3.0, 4.0, 10.0], true).unwrap();
        assert!((b[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ols_rank_deficient() {
        let mut x = DMatrix::from_element(6, 3, 1.0);
        for i in 0..6 {
            x[(i, 1)] = i as f64;
            x[(i, 2)] = 0.0;
        }
        let y = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0];
        let b = ols_fit(&x, &y, false).unwrap();
        assert!(b[2].abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-10);
        assert!(matches!(ols_fit(&x, &y, true), Err(VolError::DegenerateDesign { column: 2 })));
    }

    #[test]
    fn insanity_filter_cases() {
        let train = [1.0, 2.0, 6.0];
        assert_eq!(insanity_filter(4.0, &train), 4.0);
        assert_eq!(insanity_filter(7.0, &train), 3.0);
        assert_eq!(insanity_filter(0.5, &train), 3.0);
        assert_eq!(insanity_filter(-1.0, &train), 3.0);
        assert_eq!(insanity_filter(f64::NAN, &train), 3.0);
    }

    #[test]
    fn rolling_constant_and_length() {
        let p = RollingProtocol { train_len: 50, oos_len: 10 };
        let recs = records_from_rv(&[3.0; 81]);
        let s = rolling_forecast(&recs, HarModel::Har, &p, "X").unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.forecast.iter().all(|&f| (f - 3.0).abs() < 1e-9));
        assert_eq!(s.dates[0], recs[71].date);
        let short = records_from_rv(&[3.0; 80]);
        assert!(matches!(rolling_forecast(&short, HarModel::Har, &p, "X"), Err(VolError::InsufficientHistory { .. })));
    }

    #[test]
    fn rolling_uses_only_past_data() {
        let p = RollingProtocol { train_len: 40, oos_len: 5 };
        let rv: Vec<f64> = (0..66).map(|i| 1.0 + ((i * 37) % 13) as f64 / 4.0).collect();
        let recs = records_from_rv(&rv);
        let base = rolling_forecast(&recs, HarModel::Harq, &p, "X").unwrap();
        // perturbing day d and later never changes the forecast for day d
        for k in 0..5 {
            let d = 61 + k;
            let mut changed = recs.clone();
            for r in &mut changed[d..] {
                r.rv *= 3.0;
                r.rq *= 9.0;
            }
            let s = rolling_forecast(&changed, HarModel::Harq, &p, "X").unwrap();
            assert_eq!(s.forecast[k], base.forecast[k]);
        }
    }
}
