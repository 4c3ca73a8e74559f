//! End-to-end orchestration: configuration, content-hashed stages, run
//! directories and summary reports.

mod config;
mod dataset;
mod experiment;
mod prep;
mod report;
mod run;

use thiserror::Error;

pub use experiment::{planted_signal_run, PlantedSignalReport};
pub use config::{EvalConfig, ExplainConfig, Paths, PipelineConfig};
pub use dataset::{write_synthetic_dataset, SELF_TEST_ALPHA};
pub use prep::{daily_inputs, daily_tokens, headline_corpus};
pub use report::{delta_table, emit_report, rc_percentage, ticker_deltas, DeltaTable, FIGURE_BENCHMARK};
pub use run::{
    evaluate_ticker, hash_bytes, hash_file, load_forecasts, run_pipeline, write_evaluation, EventIndex, Manifest, RcRow, RunOptions, RunSummary, ScoreRow,
    StageRecord, StageStatus, MANIFEST, PANELS, RUN_CONFIG,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<PipelineError> },
    #[error(transparent)]
    Text(#[from] crate::textprep::TextError),
    #[error(transparent)]
    Embed(#[from] crate::embedding::EmbedError),
    #[error(transparent)]
    Vol(#[from] crate::volatility::VolError),
    #[error(transparent)]
    Nlp(#[from] crate::nlpml::NlpError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
    #[error(transparent)]
    Explain(#[from] crate::explain::ExplainError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
