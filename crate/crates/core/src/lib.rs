//! Financial news embeddings, realized-volatility forecasting and
//! token-level forecast attribution.

pub mod stats;
pub mod synth;
pub mod embedding;
pub mod evaluation;
pub mod explain;
pub mod nlpml;
pub mod pipeline;
pub mod series;
pub mod textprep;
pub mod volatility;
