use std::path::PathBuf;

use clap::Args;
use voltext::pipeline::{emit_report, run_pipeline, write_synthetic_dataset, PipelineConfig, PipelineError, RunOptions};
use voltext::synth::SynthSpec;

use super::{load_toml, require_file, user_err};
use crate::Globals;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "SYN")]
    tickers: Vec<String>,
    /// Generator settings (TOML); flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    jump_intensity: Option<f64>,
    #[arg(long)]
    p_signal: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Existing run directory to continue; unchanged stages are skipped.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory.
    #[arg(long)]
    run: PathBuf,
}

pub fn synth(a: SynthArgs, g: &Globals) -> Result<(), PipelineError> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => load_toml(p)?,
        None => SynthSpec::default(),
    };
    spec.n_days = a.days.unwrap_or(spec.n_days);
    spec.jump_intensity = a.jump_intensity.unwrap_or(spec.jump_intensity);
    spec.p_signal = a.p_signal.unwrap_or(spec.p_signal);
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    let cfg = write_synthetic_dataset(&a.out, &spec, &a.tickers)?;
    eprintln!("{} tickers x {} days -> {}", cfg.tickers.len(), spec.n_days, a.out.display());
    println!("{}", a.out.join("config.toml").display());
    Ok(())
}

pub fn run(a: RunArgs, g: &Globals) -> Result<(), PipelineError> {
    require_file(&a.config)?;
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.strict |= g.strict;
    if let Some(r) = &a.resume {
        if !r.is_dir() {
            return Err(user_err(format!("run directory not found: {}", r.display())));
        }
    }
    let summary = run_pipeline(&cfg, &RunOptions { resume: a.resume })?;
    for (stage, status) in &summary.stages {
        eprintln!("{status:?}\t{stage}");
    }
    println!("{}", summary.dir.display());
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<(), PipelineError> {
    if !a.run.is_dir() {
        return Err(user_err(format!("run directory not found: {}", a.run.display())));
    }
    for p in emit_report(&a.run)? {
        println!("{}", a.run.join(p).display());
    }
    Ok(())
}
