use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voltext::explain::{
    integrated_gradients, shapley_exact, shapley_sampled, token_report, QuadratureSpec, ReportFormat, ReportMeta,
};
use voltext::nlpml::{build_day_input, load_checkpoint, multi_day_input, CnnModel, SentenceMatrix};
use voltext::pipeline::{daily_tokens, PipelineError};
use voltext::textprep::{read_news_jsonl, HeadlineProcessor, RuleSet};
use voltext::volatility::read_records_csv;

use super::{ensure_parent, require_file, user_err};
use crate::Globals;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Ig,
    Shap,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(value_enum)]
    method: Method,
    /// Model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Explain this headline text instead of a dated forecast.
    #[arg(long, conflicts_with_all = ["date", "news", "rv"])]
    text: Option<String>,
    /// Forecast date; needs `--news`, `--rv` and `--ticker`.
    #[arg(long, requires_all = ["news", "rv", "ticker"])]
    date: Option<NaiveDate>,
    #[arg(long)]
    news: Option<PathBuf>,
    /// Realized measures giving the trading calendar.
    #[arg(long)]
    rv: Option<PathBuf>,
    #[arg(long, default_value = "")]
    ticker: String,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Print only the slots holding this token.
    #[arg(long)]
    token: Option<String>,
    #[arg(long)]
    html: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Integrated Gradients path points.
    #[arg(long, default_value_t = QuadratureSpec::default().steps)]
    steps: usize,
    /// Shapley permutations; 0 computes exact values.
    #[arg(long, default_value_t = 0)]
    samples: usize,
}

fn build_input(a: &ExplainArgs, model: &CnnModel, proc: &HeadlineProcessor) -> Result<(SentenceMatrix, Option<NaiveDate>), PipelineError> {
    let max_len = model.cfg.max_len;
    if let Some(text) = &a.text {
        let tokens = proc.headline_tokens(text);
        return Ok((build_day_input(&tokens, &model.table, max_len), None));
    }
    let (Some(date), Some(news), Some(rv)) = (a.date, &a.news, &a.rv) else {
        return Err(user_err("give either --text or --date with --news, --rv and --ticker"));
    };
    require_file(news)?;
    require_file(rv)?;
    let dates: Vec<NaiveDate> = read_records_csv(rv)?.iter().map(|r| r.date).collect();
    let d = dates
        .iter()
        .position(|&x| x == date)
        .filter(|&d| d > 0)
        .ok_or_else(|| user_err(format!("{date} has no preceding trading day in {}", rv.display())))?;
    let items = read_news_jsonl(news)?;
    let days = daily_tokens(&items, &a.ticker, &dates[..d], proc);
    Ok((multi_day_input(&days, model.cfg.input_days, &model.table, max_len), Some(date)))
}

pub fn run(a: ExplainArgs, g: &Globals) -> Result<(), PipelineError> {
    require_file(&a.model)?;
    let model = load_checkpoint(&a.model)?;
    let rules = match &a.rules {
        Some(p) => RuleSet::from_file(p)?,
        None => RuleSet::default(),
    };
    let proc = HeadlineProcessor { rules, ..HeadlineProcessor::default() };
    let (input, date) = build_input(&a, &model, &proc)?;
    let attr = match a.method {
        Method::Ig => integrated_gradients(&model, &input, &QuadratureSpec { steps: a.steps, ..QuadratureSpec::default() })?,
        Method::Shap if a.samples == 0 => shapley_exact(&model, &input)?,
        Method::Shap => {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(model.cfg.seed));
            shapley_sampled(&model, &input, a.samples, &mut rng)?
        }
    };
    let tokens: Vec<String> =
        input.token_ids[..input.n_real].iter().map(|&id| model.table.token(id).to_string()).collect();
    let meta = ReportMeta { date, ticker: a.ticker.clone() };
    for (path, fmt) in [(&a.html, ReportFormat::Html), (&a.csv, ReportFormat::Csv)] {
        if let Some(p) = path {
            ensure_parent(p)?;
            token_report(&attr, &tokens, &meta, p, fmt)?;
        }
    }
    println!("forecast,{}\nbaseline,{}", attr.output, attr.baseline_value);
    println!("slot,token,value");
    for (slot, tok) in tokens.iter().enumerate() {
        if a.token.as_deref().is_none_or(|t| t == tok) {
            println!("{slot},{tok},{}", attr.values[slot]);
        }
    }
    Ok(())
}
