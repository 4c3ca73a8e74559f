//! Aligned actual/forecast RV series shared by the forecasters and the
//! evaluation tools.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series lengths differ: {dates} dates, {actual} actuals, {forecast} forecasts")]
    LengthMismatch { dates: usize, actual: usize, forecast: usize },
    #[error("forecast file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub ticker: String,
    pub model_id: String,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub forecast: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    date: NaiveDate,
    actual_rv: f64,
    forecast_rv: f64,
    model_id: String,
}

impl ForecastSeries {
    pub fn new(
        ticker: impl Into<String>,
        model_id: impl Into<String>,
        dates: Vec<NaiveDate>,
        actual: Vec<f64>,
        forecast: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        if dates.len() != actual.len() || dates.len() != forecast.len() {
            return Err(SeriesError::LengthMismatch {
                dates: dates.len(),
                actual: actual.len(),
                forecast: forecast.len(),
            });
        }
        Ok(Self { ticker: ticker.into(), model_id: model_id.into(), dates, actual, forecast })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Keeps only the listed positions, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            ticker: self.ticker.clone(),
            model_id: self.model_id.clone(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            actual: idx.iter().map(|&i| self.actual[i]).collect(),
            forecast: idx.iter().map(|&i| self.forecast[i]).collect(),
        }
    }

    /// CSV with header `date,actual_rv,forecast_rv,model_id`.
    pub fn write_csv(&self, path: &Path) -> Result<(), SeriesError> {
        write_series_csv(path, std::slice::from_ref(self))
    }

    /// Reads a forecast CSV. A file holding several models yields one series
    /// per model id, in order of first appearance.
    pub fn read_csv(path: &Path, ticker: &str) -> Result<Vec<Self>, SeriesError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out: Vec<Self> = Vec::new();
        for row in r.deserialize() {
            let row: Row = row?;
            let pos = match out.iter().position(|s| s.model_id == row.model_id) {
                Some(p) => p,
                None => {
                    out.push(Self {
                        ticker: ticker.to_string(),
                        model_id: row.model_id.clone(),
                        dates: Vec::new(),
                        actual: Vec::new(),
                        forecast: Vec::new(),
                    });
                    out.len() - 1
                }
            };
            let s = &mut out[pos];
            s.dates.push(row.date);
            s.actual.push(row.actual_rv);
            s.forecast.push(row.forecast_rv);
        }
        Ok(out)
    }
}

/// Writes several series into one file (`date,actual_rv,forecast_rv,model_id`).
pub fn write_series_csv(path: &Path, series: &[ForecastSeries]) -> Result<(), SeriesError> {
    let mut w = csv::Writer::from_path(path)?;
    for s in series {
        for i in 0..s.len() {
            w.serialize(Row {
                date: s.dates[i],
                actual_rv: s.actual[i],
                forecast_rv: s.forecast[i],
                model_id: s.model_id.clone(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = |i| NaiveDate::from_ymd_opt(2016, 1, i).unwrap();
        let s = ForecastSeries::new("AAPL", "char", vec![d(4), d(5)], vec![1.5, 2.25], vec![1.0, 0.1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        s.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("date,actual_rv,forecast_rv,model_id\n2016-01-04,1.5,1.0,char"));
        assert_eq!(ForecastSeries::read_csv(&p, "AAPL").unwrap(), vec![s]);
    }

    #[test]
    fn length_mismatch() {
        assert!(ForecastSeries::new("x", "m", vec![], vec![1.0], vec![]).is_err());
    }
}
