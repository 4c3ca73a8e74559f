use std::path::PathBuf;

use clap::{Args, Subcommand};
use voltext::pipeline::PipelineError;
use voltext::series::write_series_csv;
use voltext::volatility::{
    compute_records, intraday_returns, read_prices_csv, read_records_csv, rolling_forecast, write_records_csv,
    HarModel, RollingProtocol, SessionGrid,
};

use super::{ensure_parent, require_file, user_err};

#[derive(Debug, Subcommand)]
pub enum RvCommand {
    /// Daily realized measures from a `timestamp,price` file.
    Compute(ComputeArgs),
    /// Rolling-window HAR-family forecasts from daily realized measures.
    Forecast(ForecastArgs),
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    prices: PathBuf,
    /// Output `date,rv,bpv,jump,rv_pos,rv_neg,rq`.
    #[arg(long)]
    out: PathBuf,
    /// Sampling interval inside the 09:30-16:00 session.
    #[arg(long, default_value_t = 5)]
    step_minutes: u32,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Realized measures as written by `rv compute`.
    #[arg(long)]
    records: PathBuf,
    /// Comma-separated models: ar1, har, harj, char, shar, arq, harq, harqf.
    #[arg(long, value_delimiter = ',', default_value = "char")]
    model: Vec<String>,
    #[arg(long, default_value_t = RollingProtocol::default().train_len)]
    train_len: usize,
    #[arg(long, default_value_t = RollingProtocol::default().oos_len)]
    oos_len: usize,
    #[arg(long, default_value = "-")]
    ticker: String,
    /// Output `date,actual_rv,forecast_rv,model_id`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(c: RvCommand) -> Result<(), PipelineError> {
    match c {
        RvCommand::Compute(a) => {
            require_file(&a.prices)?;
            if a.step_minutes == 0 {
                return Err(user_err("--step-minutes must be at least 1"));
            }
            let grid = SessionGrid { step_minutes: a.step_minutes, ..SessionGrid::default() };
            let ticks = read_prices_csv(&a.prices)?;
            let recs = compute_records(&intraday_returns(&ticks, &grid))?;
            ensure_parent(&a.out)?;
            write_records_csv(&a.out, &recs)?;
            eprintln!("{} days -> {}", recs.len(), a.out.display());
        }
        RvCommand::Forecast(a) => {
            require_file(&a.records)?;
            let models = a.model.iter().map(|m| m.parse::<HarModel>()).collect::<Result<Vec<_>, _>>()?;
            let protocol = RollingProtocol { train_len: a.train_len, oos_len: a.oos_len };
            let recs = read_records_csv(&a.records)?;
            let series = models
                .iter()
                .map(|&m| rolling_forecast(&recs, m, &protocol, &a.ticker))
                .collect::<Result<Vec<_>, _>>()?;
            ensure_parent(&a.out)?;
            write_series_csv(&a.out, &series)?;
            eprintln!("{} models x {} days -> {}", series.len(), a.oos_len, a.out.display());
        }
    }
    Ok(())
}
