use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{train, TrainConfig};
use crate::evaluation::classify_days;
use crate::explain::{track_token, QuadratureSpec, TokenOccurrence};
use crate::nlpml::{train_rolling, CnnConfig, LookupTable, RollingOutcome};
use crate::synth::{generate_synthetic, SynthSpec};
use crate::textprep::HeadlineProcessor;
use crate::volatility::RollingProtocol;

use super::prep::{daily_inputs, daily_tokens, headline_corpus};
use super::PipelineError;

/// Result of training the CNN on synthetic data with a planted marker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedSignalReport {
    pub seed: u64,
    /// Out-of-sample positions classified as jump days.
    pub jump_days: Vec<usize>,
    pub model_jump_mse: f64,
    pub baseline_jump_mse: f64,
    /// Marker attributions on out-of-sample jump days whose input holds it.
    pub marker_on_jump_days: Vec<TokenOccurrence>,
    pub events: usize,
}

impl PlantedSignalReport {
    pub fn model_wins(&self) -> bool {
        !self.jump_days.is_empty() && self.model_jump_mse < self.baseline_jump_mse
    }

    /// Share of marker occurrences on jump days with positive attribution.
    pub fn positive_share(&self) -> f64 {
        if self.marker_on_jump_days.is_empty() {
            return 0.0;
        }
        self.marker_on_jump_days.iter().filter(|o| o.value > 0.0).count() as f64 / self.marker_on_jump_days.len() as f64
    }
}

/// Generates data, trains an embedding on the headlines, runs the rolling
/// CNN forecast, and compares jump-day MSE with the training-mean forecast.
pub fn planted_signal_run(
    spec: &SynthSpec,
    emb_cfg: &TrainConfig,
    cnn: &CnnConfig,
    protocol: &RollingProtocol,
) -> Result<(PlantedSignalReport, RollingOutcome), PipelineError> {
    let data = generate_synthetic(spec)?;
    let recs = data.daily_records()?;
    let proc = HeadlineProcessor::default();
    let corpus = headline_corpus(&data.news, &proc);
    let emb = train(&corpus, emb_cfg)?;
    let days = daily_tokens(&data.news, &spec.ticker, &data.dates, &proc);
    let table = Arc::new(LookupTable::from_embedding(&emb, days.iter().flatten().map(String::as_str)));
    let inputs = daily_inputs(&days, &table, cnn.input_days, cnn.max_len);
    let rv: Vec<f64> = recs.iter().map(|r| r.rv).collect();
    let outcome = train_rolling(&inputs, &rv, &data.dates, table, cnn, protocol, &spec.ticker)?;

    let n = rv.len();
    let oos0 = n - protocol.oos_len;
    let split = classify_days(&outcome.series.actual);
    let mut model_se = 0.0;
    let mut base_se = 0.0;
    for &i in &split.jump {
        let ev = outcome.events.iter().find(|e| e.days.contains(&(oos0 + i))).expect("every day has a model");
        let mean = ev.train_targets.iter().sum::<f64>() / ev.train_targets.len() as f64;
        model_se += (outcome.series.forecast[i] - outcome.series.actual[i]).powi(2);
        base_se += (mean - outcome.series.actual[i]).powi(2);
    }
    let k = split.jump.len().max(1) as f64;
    let tracked: Vec<_> = split
        .jump
        .iter()
        .map(|&i| {
            let d = oos0 + i;
            (data.dates[d], outcome.model_for(d).expect("model in force"), &inputs[d - 1])
        })
        .collect();
    let marker_on_jump_days = track_token(&tracked, &spec.marker, &QuadratureSpec::default())?;
    let report = PlantedSignalReport {
        seed: spec.seed,
        jump_days: split.jump,
        model_jump_mse: model_se / k,
        baseline_jump_mse: base_se / k,
        marker_on_jump_days,
        events: outcome.events.len(),
    };
    Ok((report, outcome))
}
