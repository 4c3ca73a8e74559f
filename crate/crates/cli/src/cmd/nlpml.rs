use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Subcommand};
use voltext::embedding::load_embedding;
use voltext::nlpml::{save_checkpoint, train_rolling, CnnConfig, LookupTable};
use voltext::pipeline::{daily_inputs, daily_tokens, EventIndex, PipelineError};
use voltext::textprep::{read_news_jsonl, HeadlineProcessor, RuleSet};
use voltext::volatility::{read_records_csv, RollingProtocol};

use super::{load_toml, require_file, user_err};
use crate::Globals;

#[derive(Debug, Subcommand)]
pub enum NlpmlCommand {
    /// Rolling CNN forecasts for one ticker.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Realized measures as written by `rv compute`.
    #[arg(long)]
    rv: PathBuf,
    /// News records, one JSON object per line.
    #[arg(long)]
    news: PathBuf,
    #[arg(long)]
    ticker: String,
    #[arg(long)]
    embedding: PathBuf,
    /// Receives `forecast.csv`, `event_NNN.ckpt` and `events.json`.
    #[arg(long)]
    out: PathBuf,
    /// Network settings (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long)]
    retrain_every: Option<usize>,
    #[arg(long)]
    input_days: Option<usize>,
    #[arg(long)]
    trainable_embedding: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value_t = RollingProtocol::default().train_len)]
    train_len: usize,
    #[arg(long, default_value_t = RollingProtocol::default().oos_len)]
    oos_len: usize,
}

fn cnn_config(a: &TrainArgs, g: &Globals) -> Result<CnnConfig, PipelineError> {
    let mut cfg: CnnConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => CnnConfig::default(),
    };
    cfg.filters = a.filters.unwrap_or(cfg.filters);
    if let Some(w) = &a.widths {
        cfg.widths = w.clone();
    }
    cfg.retrain_every = a.retrain_every.unwrap_or(cfg.retrain_every);
    cfg.input_days = a.input_days.unwrap_or(cfg.input_days);
    cfg.trainable_embedding |= a.trainable_embedding;
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.max_len = a.max_len.unwrap_or(cfg.max_len);
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(c: NlpmlCommand, g: &Globals) -> Result<(), PipelineError> {
    let NlpmlCommand::Train(a) = c;
    for p in [&a.rv, &a.news, &a.embedding] {
        require_file(p)?;
    }
    let cfg = cnn_config(&a, g)?;
    let protocol = RollingProtocol { train_len: a.train_len, oos_len: a.oos_len };
    let rules = match &a.rules {
        Some(p) => RuleSet::from_file(p)?,
        None => RuleSet::default(),
    };
    let proc = HeadlineProcessor { rules, ..HeadlineProcessor::default() };

    let recs = read_records_csv(&a.rv)?;
    if recs.is_empty() {
        return Err(user_err(format!("{}: no records", a.rv.display())));
    }
    let dates: Vec<NaiveDate> = recs.iter().map(|r| r.date).collect();
    let rv: Vec<f64> = recs.iter().map(|r| r.rv).collect();
    let news = read_news_jsonl(&a.news)?;
    let days = daily_tokens(&news, &a.ticker, &dates, &proc);
    let emb = load_embedding(&a.embedding)?;
    let table = Arc::new(LookupTable::from_embedding(&emb, days.iter().flatten().map(String::as_str)));
    let inputs = daily_inputs(&days, &table, cfg.input_days, cfg.max_len);
    let outcome = train_rolling(&inputs, &rv, &dates, table, &cfg, &protocol, &a.ticker)?;

    std::fs::create_dir_all(&a.out)?;
    outcome.series.write_csv(&a.out.join("forecast.csv"))?;
    let mut index = Vec::new();
    for (k, ev) in outcome.events.iter().enumerate() {
        let name = format!("event_{k:03}.ckpt");
        save_checkpoint(&ev.model, &a.out.join(&name))?;
        index.push(EventIndex { checkpoint: name, first_day: ev.days.start, last_day: ev.days.end - 1 });
    }
    let json = serde_json::to_string_pretty(&index).map_err(|e| user_err(e.to_string()))?;
    std::fs::write(a.out.join("events.json"), json)?;
    eprintln!("{}: {} retraining events -> {}", cfg.model_id(), index.len(), a.out.display());
    Ok(())
}
