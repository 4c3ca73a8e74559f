use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use voltext::evaluation::{classify_days, delta_aggregate, ensemble_mean, reality_check, score, Loss, RcConfig};
use voltext::pipeline::{evaluate_ticker, write_evaluation, PipelineError};
use voltext::series::{write_series_csv, ForecastSeries};

use super::{ensure_parent, require_file, user_err};
use crate::Globals;

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Average loss of every series.
    Score(ScoreArgs),
    /// Normal/jump classification of the evaluation days.
    Split(Inputs),
    /// Loss differences of one model against a benchmark, per ticker.
    Delta(DeltaArgs),
    /// Reality check of one candidate against a set of benchmarks.
    Rc(RcArgs),
    /// Equal-weight combination of two forecasts.
    Ensemble(EnsembleArgs),
    /// Scores and reality checks on all panels, written as CSV tables.
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Forecast files as `TICKER:PATH`, or a bare path for a single ticker.
    #[arg(long = "forecasts", required = true, num_args = 1..)]
    files: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Panel {
    All,
    Normal,
    Jump,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "mse")]
    loss: String,
    #[arg(long, value_enum, default_value = "all")]
    panel: Panel,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: String,
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value = "mse")]
    loss: String,
    #[arg(long, value_enum, default_value = "all")]
    panel: Panel,
}

#[derive(Debug, Args)]
pub struct RcArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    candidate: String,
    /// Benchmark model ids; every other series when omitted.
    #[arg(long, value_delimiter = ',')]
    benchmarks: Vec<String>,
    #[arg(long, default_value = "mse")]
    loss: String,
    #[arg(long, value_enum, default_value = "all")]
    panel: Panel,
    #[arg(long, default_value_t = RcConfig::default().n_boot)]
    n_boot: usize,
    #[arg(long, default_value_t = RcConfig::default().avg_block)]
    avg_block: f64,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Benchmark model ids; the remaining series are candidates.
    #[arg(long, value_delimiter = ',', required = true)]
    benchmarks: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "mse,qlike,mda")]
    losses: Vec<String>,
    #[arg(long, default_value_t = RcConfig::default().n_boot)]
    n_boot: usize,
    /// Receives `scores.csv` and `rc.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// Series grouped by ticker, in file order within each ticker.
fn load(inputs: &Inputs) -> Result<BTreeMap<String, Vec<ForecastSeries>>, PipelineError> {
    let mut out: BTreeMap<String, Vec<ForecastSeries>> = BTreeMap::new();
    for spec in &inputs.files {
        let (ticker, path) = match spec.split_once(':') {
            Some((t, p)) if !t.is_empty() && !t.contains(['/', '\\']) => (t.to_string(), PathBuf::from(p)),
            _ => ("-".to_string(), PathBuf::from(spec)),
        };
        require_file(&path)?;
        let series = ForecastSeries::read_csv(&path, &ticker)?;
        if series.is_empty() {
            return Err(user_err(format!("{}: no forecasts", path.display())));
        }
        let slot = out.entry(ticker.clone()).or_default();
        for s in series {
            if slot.iter().any(|x| x.model_id == s.model_id) {
                return Err(user_err(format!("model {} listed twice for ticker {ticker}", s.model_id)));
            }
            slot.push(s);
        }
    }
    Ok(out)
}

fn parse_loss(s: &str) -> Result<Loss, PipelineError> {
    s.parse().map_err(PipelineError::Config)
}

fn panel_index(series: &[ForecastSeries], panel: Panel) -> Vec<usize> {
    let Some(first) = series.first() else { return Vec::new() };
    let split = classify_days(&first.actual);
    match panel {
        Panel::All => (0..first.len()).collect(),
        Panel::Normal => split.normal,
        Panel::Jump => split.jump,
    }
}

fn find<'a>(series: &'a [ForecastSeries], id: &str, ticker: &str) -> Result<&'a ForecastSeries, PipelineError> {
    series
        .iter()
        .find(|s| s.model_id == id)
        .ok_or_else(|| user_err(format!("no series {id} for ticker {ticker}")))
}

pub fn run(c: EvalCommand, g: &Globals) -> Result<(), PipelineError> {
    match c {
        EvalCommand::Score(a) => {
            let loss = parse_loss(&a.loss)?;
            println!("ticker,model,loss,value");
            for (t, series) in load(&a.inputs)? {
                let idx = panel_index(&series, a.panel);
                for s in &series {
                    println!("{t},{},{},{}", s.model_id, a.loss, score(&s.subset(&idx), loss)?);
                }
            }
        }
        EvalCommand::Split(inputs) => {
            println!("ticker,date,panel");
            for (t, series) in load(&inputs)? {
                let first = &series[0];
                let split = classify_days(&first.actual);
                let mut jump = vec![false; first.len()];
                for &i in &split.jump {
                    jump[i] = true;
                }
                for (d, j) in first.dates.iter().zip(jump) {
                    println!("{t},{d},{}", if j { "jump" } else { "normal" });
                }
            }
        }
        EvalCommand::Delta(a) => {
            let loss = parse_loss(&a.loss)?;
            let mut models = Vec::new();
            let mut benches = Vec::new();
            for (t, series) in load(&a.inputs)? {
                let idx = panel_index(&series, a.panel);
                models.push(find(&series, &a.model, &t)?.subset(&idx));
                benches.push(find(&series, &a.benchmark, &t)?.subset(&idx));
            }
            let d = delta_aggregate(&models, &benches, loss)?;
            println!("ticker,delta");
            for (t, v) in &d.per_ticker {
                println!("{t},{v}");
            }
            println!("avg,{}\nmed,{}", d.avg, d.med);
        }
        EvalCommand::Rc(a) => {
            let loss = parse_loss(&a.loss)?;
            let rc = RcConfig { n_boot: a.n_boot, avg_block: a.avg_block, seed: g.seed.unwrap_or(RcConfig::default().seed), ..RcConfig::default() };
            println!("ticker,statistic,p_value");
            for (t, series) in load(&a.inputs)? {
                let cand = find(&series, &a.candidate, &t)?;
                let benches: Vec<ForecastSeries> = if a.benchmarks.is_empty() {
                    series.iter().filter(|s| s.model_id != a.candidate).cloned().collect()
                } else {
                    a.benchmarks.iter().map(|b| find(&series, b, &t).cloned()).collect::<Result<_, _>>()?
                };
                if benches.is_empty() {
                    return Err(user_err(format!("no benchmark series for ticker {t}")));
                }
                let idx = panel_index(&series, a.panel);
                let res = reality_check(cand, &benches, loss, Some(&idx), &rc)?;
                println!("{t},{},{}", res.statistic, res.p_value);
            }
        }
        EvalCommand::Ensemble(a) => {
            let all = load(&a.inputs)?;
            if all.len() != 1 {
                return Err(user_err("ensemble takes the forecasts of exactly one ticker"));
            }
            let (t, series) = all.into_iter().next().expect("one ticker");
            let e = ensemble_mean(find(&series, &a.a, &t)?, find(&series, &a.b, &t)?)?;
            ensure_parent(&a.out)?;
            write_series_csv(&a.out, &[e])?;
        }
        EvalCommand::Table(a) => {
            let losses: Vec<(String, Loss)> = a
                .losses
                .iter()
                .map(|l| Ok((l.to_ascii_lowercase(), parse_loss(l)?)))
                .collect::<Result<_, PipelineError>>()?;
            let rc = RcConfig { n_boot: a.n_boot, seed: g.seed.unwrap_or(RcConfig::default().seed), ..RcConfig::default() };
            let mut scores = Vec::new();
            let mut rcs = Vec::new();
            for (t, series) in load(&a.inputs)? {
                let (benches, cands): (Vec<ForecastSeries>, Vec<ForecastSeries>) =
                    series.into_iter().partition(|s| a.benchmarks.contains(&s.model_id));
                let (s, r) = evaluate_ticker(&t, &benches, &cands, &losses, &rc)?;
                scores.extend(s);
                rcs.extend(r);
            }
            let [s, r] = write_evaluation(&a.out, &scores, &rcs)?;
            eprintln!("{} scores, {} reality checks -> {}, {}", scores.len(), rcs.len(), s.display(), r.display());
        }
    }
    Ok(())
}
