use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::VolError;

/// Intraday log-returns of one trading session.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayDay {
    pub date: NaiveDate,
    pub returns: Vec<f64>,
}

pub fn compute_rv(returns: &[f64]) -> f64 {
    returns.iter().map(|r| r * r).sum()
}

/// Bipower variation `(π/2) Σ |r_i||r_{i+1}|`.
pub fn compute_bpv(returns: &[f64]) -> Result<f64, VolError> {
    if returns.len() < 2 {
        return Err(VolError::TooFewReturns(returns.len()));
    }
    Ok(FRAC_PI_2 * returns.windows(2).map(|w| w[0].abs() * w[1].abs()).sum::<f64>())
}

/// Positive and negative realized semivariances.
pub fn compute_semivariance(returns: &[f64]) -> (f64, f64) {
    let pos = returns.iter().filter(|&&r| r > 0.0).map(|r| r * r).sum();
    let neg = returns.iter().filter(|&&r| r < 0.0).map(|r| r * r).sum();
    (pos, neg)
}

/// Realized quarticity `(M/3) Σ r⁴`.
pub fn compute_rq(returns: &[f64]) -> f64 {
    returns.len() as f64 / 3.0 * returns.iter().map(|r| r.powi(4)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyVolRecord {
    pub date: NaiveDate,
    pub rv: f64,
    pub bpv: f64,
    pub jump: f64,
    pub rv_pos: f64,
    pub rv_neg: f64,
    pub rq: f64,
}

impl DailyVolRecord {
    pub fn from_day(day: &IntradayDay) -> Result<Self, VolError> {
        let r = &day.returns;
        if let Some(bad) = r.iter().find(|v| !v.is_finite()) {
            return Err(VolError::NonFinite(format!("return {bad} on {}", day.date)));
        }
        let bpv = compute_bpv(r)?;
        let (rv_pos, rv_neg) = compute_semivariance(r);
        // rv defined as the semivariance sum so the identity is exact
        let rv = rv_pos + rv_neg;
        Ok(Self { date: day.date, rv, bpv, jump: (rv - bpv).max(0.0), rv_pos, rv_neg, rq: compute_rq(r) })
    }
}

pub fn compute_records(days: &[IntradayDay]) -> Result<Vec<DailyVolRecord>, VolError> {
    days.iter().map(DailyVolRecord::from_day).collect()
}

/// CSV `date,rv,bpv,jump,rv_pos,rv_neg,rq`.
pub fn write_records_csv(path: &Path, records: &[DailyVolRecord]) -> Result<(), VolError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<DailyVolRecord>, VolError> {
    let mut r = csv::Reader::from_path(path)?;
    let recs = r.deserialize().collect::<Result<Vec<DailyVolRecord>, _>>()?;
    Ok(recs)
}
