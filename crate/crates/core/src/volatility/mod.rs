//! Realized measures from intraday returns and HAR-family forecasts.

mod har;
mod measures;
mod prices;

use thiserror::Error;

pub use har::{
    build_har_features, fit_window, insanity_filter, ols_fit, predict, rolling_forecast, HarModel, RollingProtocol,
    WindowFit, MONTH, WEEK,
};
pub use measures::{
    compute_bpv, compute_records, compute_rq, compute_rv, compute_semivariance, read_records_csv, write_records_csv,
    DailyVolRecord, IntradayDay,
};
pub use prices::{intraday_returns, read_prices_csv, write_prices_csv, PriceTick, SessionGrid};

#[derive(Debug, Error)]
pub enum VolError {
    #[error("need at least 2 intraday returns, got {0}")]
    TooFewReturns(usize),
    #[error("insufficient history: need {need} days, got {got}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("design column {column} is identically zero")]
    DegenerateDesign { column: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unknown HAR model {0:?}")]
    UnknownModel(String),
    #[error("price file line {line}: {msg}")]
    Price { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
