//! Token-level attribution of CNN forecasts: Integrated Gradients along the
//! straight path from a zero input, exact and sampled Shapley values, and
//! CSV/HTML token reports.

mod ig;
mod report;
mod shapley;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlpml::NlpError;

pub use ig::{gauss_legendre, integrated_gradients, integrated_gradients_fn, Differentiable};
pub use report::{summarize_occurrences, token_report, track_token, OccurrenceCounts, ReportFormat, ReportMeta, TokenOccurrence};
pub use shapley::{shapley_exact, shapley_exact_fn, shapley_sampled, shapley_sampled_fn, MAX_EXACT_TOKENS};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("non-finite gradient at path point {alpha}")]
    NonFiniteGradient { alpha: f64 },
    #[error("{n} tokens exceed the exact Shapley cap of {cap}")]
    TooManyTokens { n: usize, cap: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] NlpError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ig,
    ShapleyExact,
    ShapleySampled,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ig => "ig",
            Method::ShapleyExact => "shapley-exact",
            Method::ShapleySampled => "shapley-sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    #[default]
    GaussLegendre,
    /// Right Riemann sum at `k/m`, `k = 1..=m`.
    Riemann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub method: Quadrature,
    pub steps: usize,
    /// Path points evaluated per parallel batch.
    pub batch: usize,
    /// Apply the rule on every linear piece of the path separately when the
    /// function reports its kinks.
    pub split_at_kinks: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { method: Quadrature::GaussLegendre, steps: 50, batch: 100, split_at_kinks: true }
    }
}

impl QuadratureSpec {
    /// Plain rule without kink splitting.
    pub fn plain(method: Quadrature, steps: usize) -> Self {
        Self { method, steps, split_at_kinks: false, ..Self::default() }
    }

    /// Nodes in `(0, 1]` and their weights (summing to one).
    pub fn nodes(&self) -> Result<(Vec<f64>, Vec<f64>), ExplainError> {
        if self.steps == 0 || self.batch == 0 {
            return Err(ExplainError::InvalidSpec("steps and batch must be at least 1".into()));
        }
        Ok(match self.method {
            Quadrature::GaussLegendre => gauss_legendre(self.steps),
            Quadrature::Riemann => {
                let m = self.steps as f64;
                ((1..=self.steps).map(|k| k as f64 / m).collect(), vec![1.0 / m; self.steps])
            }
        })
    }
}

/// Per-slot attributions of one forecast. Slots past the real tokens are
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub values: Vec<f64>,
    /// Model output at the baseline (all-zero input or empty coalition).
    pub baseline_value: f64,
    /// Model output on the actual input.
    pub output: f64,
    pub method: Method,
    /// Standard error per slot, for sampled estimates.
    pub std_errors: Option<Vec<f64>>,
}

impl AttributionVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}
