use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::Arc;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::series::ForecastSeries;
use crate::volatility::{insanity_filter, RollingProtocol};

use super::adam::{adam_step, AdamState};
use super::input::{LookupTable, SentenceMatrix, OOV_ROW};
use super::model::{CnnConfig, CnnModel};
use super::NlpError;

/// Forecast-day ranges, one per training event: the out-of-sample days of
/// a series of length `n` cut into blocks of `retrain_every`.
pub fn schedule(n: usize, oos_len: usize, retrain_every: usize) -> Vec<Range<usize>> {
    let start = n.saturating_sub(oos_len);
    (start..n).step_by(retrain_every.max(1)).map(|s| s..(s + retrain_every).min(n)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainedEvent {
    /// Days forecast by this model (positions in the input series).
    pub days: Range<usize>,
    pub model: CnnModel,
    pub train_targets: Vec<f64>,
    pub epochs_run: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct RollingOutcome {
    pub series: ForecastSeries,
    pub events: Vec<TrainedEvent>,
}

impl RollingOutcome {
    /// Model in force on day `day` (position in the input series).
    pub fn model_for(&self, day: usize) -> Option<&CnnModel> {
        self.events.iter().find(|e| e.days.contains(&day)).map(|e| &e.model)
    }
}

/// Trains one model on `(inputs[i], targets[i])` pairs from a fresh
/// initialisation seeded with `cfg.seed`. Returns the model, the number of
/// epochs run and the final epoch's mean objective.
pub fn train_event(
    table: Arc<LookupTable>,
    inputs: &[&SentenceMatrix],
    targets: &[f64],
    cfg: &CnnConfig,
) -> Result<(CnnModel, usize, f64), NlpError> {
    cfg.validate()?;
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(NlpError::ShapeMismatch(format!("{} inputs vs {} targets", inputs.len(), targets.len())));
    }
    if let Some(s) = inputs.iter().find(|s| s.max_len() != cfg.max_len) {
        return Err(NlpError::ShapeMismatch(format!("input has {} slots, config says {}", s.max_len(), cfg.max_len)));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(NlpError::NonFinite("training targets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut model = CnnModel::init(cfg.clone(), table, mean, &mut rng);
    let dim = model.dim();
    let nn = model.layout.no_news;
    let mut state = AdamState::new(model.layout.len);
    let mut grads = vec![0.0; model.layout.len];

    let trainable = cfg.trainable_embedding;
    let (mut emb_state, mut emb_grads) = if trainable {
        let n = model.table.data.len();
        (Some(AdamState::new(n)), vec![0.0; n])
    } else {
        (None, Vec::new())
    };

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut prev = f64::INFINITY;
    let mut stall = 0;
    let mut epochs_run = 0;
    let mut last = f64::NAN;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut n_batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut touched = BTreeSet::new();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let input = inputs[i];
                let rows = model.resolve(input);
                let cache = model.forward_rows(&rows, Some(&mut rng));
                let err = cache.output - targets[i];
                batch_loss += err * err * scale;
                let mut d_rows = vec![0.0; rows.len()];
                model.backprop(&cache, &rows, 2.0 * err * scale, Some(&mut grads), Some(&mut d_rows));
                if input.no_news {
                    for (g, d) in grads[nn..nn + dim].iter_mut().zip(&d_rows) {
                        *g += d;
                    }
                } else if trainable {
                    for (p, &id) in input.token_ids[..input.n_real].iter().enumerate() {
                        if id <= OOV_ROW {
                            continue;
                        }
                        touched.insert(id);
                        let r = id as usize * dim;
                        for (g, d) in emb_grads[r..r + dim].iter_mut().zip(&d_rows[p * dim..(p + 1) * dim]) {
                            *g += d;
                        }
                    }
                }
            }
            batch_loss += model.l2_penalty();
            model.add_l2_grad(&mut grads);
            adam_step(&mut model.params, &grads, &mut state, &cfg.adam);
            if let Some(es) = emb_state.as_mut() {
                sparse_adam(Arc::make_mut(&mut model.table), &mut emb_grads, es, &touched, cfg);
            }
            if !batch_loss.is_finite() {
                return Err(NlpError::NonFinite("training loss".into()));
            }
            total += batch_loss;
            n_batches += 1;
        }
        epochs_run += 1;
        last = total / n_batches as f64;
        if prev - last < cfg.early_stop_tol {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        } else {
            stall = 0;
        }
        prev = prev.min(last);
    }
    Ok((model, epochs_run, last))
}

/// Adam restricted to the embedding rows seen in the batch; the step count
/// is shared by all rows.
fn sparse_adam(
    table: &mut LookupTable,
    grads: &mut [f64],
    state: &mut AdamState,
    touched: &BTreeSet<u32>,
    cfg: &CnnConfig,
) {
    let h = &cfg.adam;
    state.t += 1;
    let c1 = 1.0 - h.beta1.powi(state.t as i32);
    let c2 = 1.0 - h.beta2.powi(state.t as i32);
    let dim = table.dim;
    for &id in touched {
        let r = id as usize * dim;
        for i in r..r + dim {
            let g = grads[i];
            state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
            state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
            table.data[i] -= h.lr * (state.m[i] / c1) / ((state.v[i] / c2).sqrt() + h.eps);
            grads[i] = 0.0;
        }
    }
}

/// Rolling out-of-sample forecasts: `inputs[t]` (news available before the
/// open of day `t + 1`) predicts `rv[t + 1]`. The last `oos_len` days are
/// forecast; a model is trained on the trailing `train_len` pairs every
/// `retrain_every` days and forecasts until the next retraining. Forecasts
/// pass through the insanity filter of the event's training targets.
#[allow(clippy::too_many_arguments)]
pub fn train_rolling(
    inputs: &[SentenceMatrix],
    rv: &[f64],
    dates: &[NaiveDate],
    table: Arc<LookupTable>,
    cfg: &CnnConfig,
    protocol: &RollingProtocol,
    ticker: &str,
) -> Result<RollingOutcome, NlpError> {
    cfg.validate()?;
    let n = rv.len();
    if inputs.len() != n || dates.len() != n {
        return Err(NlpError::ShapeMismatch(format!(
            "{} inputs, {} targets, {} dates",
            inputs.len(),
            n,
            dates.len()
        )));
    }
    let need = protocol.train_len + protocol.oos_len + 1;
    if n < need {
        return Err(NlpError::InsufficientHistory { need, got: n });
    }
    let plan = schedule(n, protocol.oos_len, cfg.retrain_every);
    let events = plan
        .into_par_iter()
        .map(|days| {
            let e = days.start;
            let span = e - protocol.train_len..e;
            let xs: Vec<&SentenceMatrix> = span.clone().map(|t| &inputs[t - 1]).collect();
            let ys = &rv[span];
            let (model, epochs_run, final_loss) = train_event(table.clone(), &xs, ys, cfg)?;
            Ok(TrainedEvent { days, model, train_targets: ys.to_vec(), epochs_run, final_loss })
        })
        .collect::<Result<Vec<_>, NlpError>>()?;

    let oos = protocol.oos_range(n);
    let mut forecast = Vec::with_capacity(oos.len());
    for ev in &events {
        for d in ev.days.clone() {
            let f = ev.model.predict(&inputs[d - 1]);
            forecast.push(insanity_filter(f, &ev.train_targets));
        }
    }
    let series = ForecastSeries::new(ticker, cfg.model_id(), dates[oos.clone()].to_vec(), rv[oos].to_vec(), forecast)
        .map_err(|e| NlpError::ShapeMismatch(e.to_string()))?;
    Ok(RollingOutcome { series, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_arithmetic() {
        assert_eq!(schedule(100, 10, 5), vec![90..95, 95..100]);
        assert_eq!(schedule(100, 11, 5).len(), 3);
        assert_eq!(schedule(100, 300, 5).len(), 20);
        for oos in 1..40 {
            assert_eq!(schedule(500, oos, 5).len(), oos.div_ceil(5));
        }
    }
}
