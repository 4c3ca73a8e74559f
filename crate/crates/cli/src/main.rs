//! `voltext` command-line tool: individual pipeline steps as subcommands
//! plus `run` for a full configured experiment.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voltext::explain::ExplainError;
use voltext::nlpml::NlpError;
use voltext::pipeline::PipelineError;
use voltext::volatility::VolError;

mod cmd;

#[derive(Debug, Parser)]
#[command(name = "voltext", version, about = "News-driven realized volatility forecasting")]
struct Cli {
    /// Master seed; overrides seeds in configs and defaults.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-worker deterministic mode.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean and tokenize headlines into a one-sentence-per-line corpus.
    Clean(cmd::text::CleanArgs),
    /// Train and query word embeddings.
    #[command(subcommand)]
    Embed(cmd::embed::EmbedCommand),
    /// Realized measures and HAR-family forecasts.
    #[command(subcommand)]
    Rv(cmd::rv::RvCommand),
    /// CNN forecasts from daily headlines.
    #[command(subcommand)]
    Nlpml(cmd::nlpml::NlpmlCommand),
    /// Score, compare and test forecast files.
    #[command(subcommand)]
    Eval(cmd::eval::EvalCommand),
    /// Token attributions of a trained CNN.
    Explain(cmd::explain::ExplainArgs),
    /// Write a synthetic multi-ticker dataset with a starter config.
    Synth(cmd::pipeline::SynthArgs),
    /// Execute a configured experiment.
    Run(cmd::pipeline::RunArgs),
    /// Rebuild the summary tables of a finished run.
    Report(cmd::pipeline::ReportArgs),
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub seed: Option<u64>,
    pub strict: bool,
    pub jobs: usize,
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(PipelineError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let g = Globals { seed: cli.seed, strict: cli.strict, jobs };
    match cli.command {
        Command::Clean(a) => cmd::text::clean(a),
        Command::Embed(c) => cmd::embed::run(c, &g),
        Command::Rv(c) => cmd::rv::run(c),
        Command::Nlpml(c) => cmd::nlpml::run(c, &g),
        Command::Eval(c) => cmd::eval::run(c, &g),
        Command::Explain(a) => cmd::explain::run(a, &g),
        Command::Synth(a) => cmd::pipeline::synth(a, &g),
        Command::Run(a) => cmd::pipeline::run(a, &g),
        Command::Report(a) => cmd::pipeline::report(a),
    }
}

/// 2 for failures that point at a defect or a numerical breakdown rather
/// than at the user's input, 1 otherwise.
fn exit_code(err: &PipelineError) -> u8 {
    let nlp_internal = |e: &NlpError| matches!(e, NlpError::NonFinite(_) | NlpError::ShapeMismatch(_));
    match err {
        PipelineError::Stage { source, .. } => exit_code(source),
        PipelineError::Nlp(e) if nlp_internal(e) => 2,
        PipelineError::Explain(ExplainError::NonFiniteGradient { .. }) => 2,
        PipelineError::Explain(ExplainError::Model(e)) if nlp_internal(e) => 2,
        PipelineError::Vol(VolError::ShapeMismatch(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(2)
        }
    }
}
