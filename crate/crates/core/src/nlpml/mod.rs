//! Convolutional network over a day's headline tokens that regresses the
//! next day's realized variance, with Adam training on a rolling schedule.

mod adam;
mod checkpoint;
mod input;
mod model;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use input::{build_day_input, multi_day_input, LookupTable, SentenceMatrix, OOV_ROW, OOV_TOKEN, PAD_ROW, PAD_TOKEN};
pub use model::{conv_valid, AdamConfig, CnnConfig, CnnModel, ForwardCache, ParamLayout};
pub use train::{schedule, train_event, train_rolling, RollingOutcome, TrainedEvent};

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("kernel width {width} does not fit an input of {len} rows")]
    KernelTooLarge { width: usize, len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("insufficient history: need {need} days, got {got}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
