use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{load_embedding, save_embedding, train, EmbeddingFormat};
use crate::evaluation::{classify_days, reality_check, score, Loss, RcConfig};
use crate::explain::track_token;
use crate::nlpml::{load_checkpoint, save_checkpoint, train_rolling, CnnConfig, LookupTable, SentenceMatrix};
use crate::series::{write_series_csv, ForecastSeries};
use crate::textprep::{read_news_jsonl, HeadlineProcessor, RuleSet, SentenceCorpus};
use crate::volatility::{
    compute_records, intraday_returns, read_prices_csv, read_records_csv, rolling_forecast, write_records_csv,
    DailyVolRecord,
};

use super::config::PipelineConfig;
use super::prep::{daily_inputs, daily_tokens, headline_corpus};
use super::report::emit_report;
use super::PipelineError;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of the stage name, its parameters and its input contents.
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the run directory) to content hash.
    pub outputs: BTreeMap<String, String>,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub strict: bool,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("manifest: {e}")))
    }

    fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    Ok(hash_bytes(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue in an existing run directory, skipping unchanged stages.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub stages: Vec<(String, StageStatus)>,
}

impl RunSummary {
    pub fn ran(&self) -> Vec<&str> {
        self.stages.iter().filter(|s| s.1 == StageStatus::Ran).map(|s| s.0.as_str()).collect()
    }
}

struct Runner {
    dir: PathBuf,
    manifest: Manifest,
    previous: BTreeMap<String, StageRecord>,
    rerun: BTreeSet<String>,
    log: Vec<(String, StageStatus)>,
}

impl Runner {
    /// Runs `body` unless the stage's key matches the previous run, its
    /// recorded outputs are intact, and none of `deps` ran in this
    /// invocation. `body` returns output paths relative to the run
    /// directory.
    fn stage<P: Serialize>(
        &mut self,
        name: &str,
        deps: &[String],
        params: &P,
        inputs: &[PathBuf],
        body: impl FnOnce(&Path) -> Result<Vec<String>, PipelineError>,
    ) -> Result<(), PipelineError> {
        let mut input_hashes = BTreeMap::new();
        for p in inputs {
            let label = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned();
            input_hashes.insert(label, hash_file(p)?);
        }
        let params = serde_json::to_string(params).map_err(|e| PipelineError::Config(e.to_string()))?;
        let material = serde_json::json!({ "stage": name, "params": params, "inputs": input_hashes.values().collect::<Vec<_>>() });
        let key = hash_bytes(material.to_string().as_bytes());

        let intact = |rec: &StageRecord| {
            rec.outputs.iter().all(|(p, h)| hash_file(&self.dir.join(p)).map(|x| &x == h).unwrap_or(false))
        };
        let upstream_ran = deps.iter().any(|d| self.rerun.contains(d));
        if let Some(prev) = self.previous.get(name) {
            if prev.key == key && !upstream_ran && intact(prev) {
                let mut rec = prev.clone();
                rec.status = StageStatus::Skipped;
                self.manifest.stages.insert(name.to_string(), rec);
                self.log.push((name.to_string(), StageStatus::Skipped));
                return Ok(());
            }
        }
        let outputs = body(&self.dir).map_err(|e| PipelineError::Stage { stage: name.to_string(), source: Box::new(e) })?;
        let mut out_hashes = BTreeMap::new();
        for o in outputs {
            out_hashes.insert(o.clone(), hash_file(&self.dir.join(&o))?);
        }
        self.manifest
            .stages
            .insert(name.to_string(), StageRecord { key, inputs: input_hashes, outputs: out_hashes, status: StageStatus::Ran });
        self.manifest.save(&self.dir)?;
        self.rerun.insert(name.to_string());
        self.log.push((name.to_string(), StageStatus::Ran));
        Ok(())
    }
}

fn new_run_dir(output: &Path) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(output)?;
    let stamp = chrono::Utc::now().format("run-%Y%m%d-%H%M%S");
    for k in 0.. {
        let dir = output.join(format!("{stamp}-{k:02}"));
        if !dir.exists() {
            std::fs::create_dir_all(&dir)?;
            return Ok(dir);
        }
    }
    unreachable!("unbounded search for a free run directory")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventIndex {
    pub checkpoint: String,
    pub first_day: usize,
    pub last_day: usize,
}

fn load_rules(cfg: &PipelineConfig) -> Result<RuleSet, PipelineError> {
    Ok(match &cfg.paths.rules {
        Some(p) => RuleSet::from_file(p)?,
        None => RuleSet::default(),
    })
}

fn rel(ticker: &str, parts: &[&str]) -> String {
    let mut s = String::new();
    for p in parts {
        s.push_str(&p.replace("{ticker}", ticker));
    }
    s
}

fn ensure_parent(dir: &Path, rel: &str) -> Result<PathBuf, PipelineError> {
    let p = dir.join(rel);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(p)
}

/// Executes the configured pipeline in a fresh run directory (or resumes
/// `opts.resume`): realized measures, headline corpus, embedding, daily
/// tokens, HAR and CNN forecasts, evaluation, attribution and report.
pub fn run_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let cfg = config.seeded();
    let losses = cfg.losses()?;
    let dir = match &opts.resume {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.clone()
        }
        None => new_run_dir(&cfg.paths.output)?,
    };
    let previous = Manifest::load(&dir).map(|m| m.stages).unwrap_or_default();
    let cfg_text = cfg.to_toml()?;
    std::fs::write(dir.join(RUN_CONFIG), &cfg_text)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        strict: cfg.strict,
        config_hash: hash_bytes(cfg_text.as_bytes()),
        stages: BTreeMap::new(),
    };
    let mut r = Runner { dir: dir.clone(), manifest, previous, rerun: BTreeSet::new(), log: Vec::new() };
    let rules = load_rules(&cfg)?;
    let proc = HeadlineProcessor { rules, ..HeadlineProcessor::default() };
    let mut text_inputs = vec![cfg.paths.news.clone()];
    text_inputs.extend(cfg.paths.rules.clone());

    for t in &cfg.tickers {
        let price = cfg.price_path(t);
        r.stage(&format!("rv/{t}"), &[], &cfg.session, std::slice::from_ref(&price), |dir| {
            let out = rel(t, &["rv/", "{ticker}", ".csv"]);
            let ticks = read_prices_csv(&price)?;
            let recs = compute_records(&intraday_returns(&ticks, &cfg.session))?;
            write_records_csv(&ensure_parent(dir, &out)?, &recs)?;
            Ok(vec![out])
        })?;
    }

    let news_items = read_news_jsonl(&cfg.paths.news)?;
    let needs_text = !cfg.cnn.is_empty();
    let emb_path = match (&cfg.paths.embedding, needs_text) {
        (_, false) => None,
        (Some(p), true) => Some(p.clone()),
        (None, true) => {
            r.stage("corpus", &[], &(), &text_inputs, |dir| {
                let out = "corpus/headlines.txt".to_string();
                headline_corpus(&news_items, &proc).write_lines(&ensure_parent(dir, &out)?)?;
                Ok(vec![out])
            })?;
            let corpus_path = dir.join("corpus/headlines.txt");
            r.stage("embed", &["corpus".into()], &cfg.embedding, std::slice::from_ref(&corpus_path), |dir| {
                let out = "embedding/embedding.bin".to_string();
                let corpus = SentenceCorpus::read_lines(&corpus_path)?;
                let emb = train(&corpus, &cfg.embedding)?;
                save_embedding(&emb, &ensure_parent(dir, &out)?, EmbeddingFormat::Binary)?;
                Ok(vec![out])
            })?;
            Some(dir.join("embedding/embedding.bin"))
        }
    };

    for t in &cfg.tickers {
        let rv_path = dir.join(format!("rv/{t}.csv"));
        let recs = read_records_csv(&rv_path)?;
        let rv_dep = format!("rv/{t}");
        if !cfg.har.is_empty() {
            r.stage(&format!("har/{t}"), std::slice::from_ref(&rv_dep), &(&cfg.har, &cfg.protocol), std::slice::from_ref(&rv_path), |dir| {
                let out = format!("forecasts/{t}/har.csv");
                let series = cfg
                    .har
                    .iter()
                    .map(|&m| rolling_forecast(&recs, m, &cfg.protocol, t))
                    .collect::<Result<Vec<_>, _>>()?;
                write_series_csv(&ensure_parent(dir, &out)?, &series)?;
                Ok(vec![out])
            })?;
        }
        if let Some(emb_path) = &emb_path {
            let mut inputs = text_inputs.clone();
            inputs.push(rv_path.clone());
            r.stage(&format!("tokens/{t}"), std::slice::from_ref(&rv_dep), &(), &inputs, |dir| {
                let out = format!("tokens/{t}.json");
                let dates: Vec<NaiveDate> = recs.iter().map(|r| r.date).collect();
                let days = daily_tokens(&news_items, t, &dates, &proc);
                let json = serde_json::to_string(&days).map_err(|e| PipelineError::Config(e.to_string()))?;
                std::fs::write(ensure_parent(dir, &out)?, json)?;
                Ok(vec![out])
            })?;
            let tok_path = dir.join(format!("tokens/{t}.json"));
            let mut deps = vec![rv_dep.clone(), format!("tokens/{t}")];
            if cfg.paths.embedding.is_none() {
                deps.push("embed".into());
            }
            for cnn in &cfg.cnn {
                let id = cnn.model_id();
                let inputs = vec![rv_path.clone(), tok_path.clone(), emb_path.clone()];
                r.stage(&format!("nlpml/{t}/{id}"), &deps, &(cnn, &cfg.protocol), &inputs, |dir| {
                    nlpml_stage(dir, t, &recs, &tok_path, emb_path, cnn, &cfg)
                })?;
            }
        }
    }

    let mut fc_inputs = Vec::new();
    let mut fc_deps = Vec::new();
    for t in &cfg.tickers {
        if !cfg.har.is_empty() {
            fc_inputs.push(dir.join(format!("forecasts/{t}/har.csv")));
            fc_deps.push(format!("har/{t}"));
        }
        for c in &cfg.cnn {
            fc_inputs.push(dir.join(format!("forecasts/{t}/{}.csv", c.model_id())));
            fc_deps.push(format!("nlpml/{t}/{}", c.model_id()));
        }
    }
    r.stage("eval", &fc_deps, &(&cfg.evaluation, &cfg.har, cfg.cnn.iter().map(|c| c.model_id()).collect::<Vec<_>>()), &fc_inputs, |dir| {
        eval_stage(dir, &cfg, &losses)
    })?;

    if let (Some(ex), Some(_)) = (&cfg.explain, &emb_path) {
        let nl_deps: Vec<String> = fc_deps.iter().filter(|d| d.starts_with("nlpml/")).cloned().collect();
        let mut inputs: Vec<PathBuf> = Vec::new();
        for t in &cfg.tickers {
            inputs.push(dir.join(format!("tokens/{t}.json")));
            for c in &cfg.cnn {
                inputs.push(dir.join(format!("models/{t}/{}/events.json", c.model_id())));
            }
        }
        r.stage("explain", &nl_deps, ex, &inputs, |dir| explain_stage(dir, &cfg))?;
    }

    r.stage("report", &["eval".into()], &(), &[dir.join("eval/scores.csv"), dir.join("eval/rc.csv")], |dir| {
        emit_report(dir)
    })?;

    r.manifest.save(&dir)?;
    Ok(RunSummary { dir, stages: r.log })
}

fn nlpml_stage(
    dir: &Path,
    t: &str,
    recs: &[DailyVolRecord],
    tok_path: &Path,
    emb_path: &Path,
    cnn: &CnnConfig,
    cfg: &PipelineConfig,
) -> Result<Vec<String>, PipelineError> {
    let id = cnn.model_id();
    let days: Vec<Vec<String>> = serde_json::from_str(&std::fs::read_to_string(tok_path)?)
        .map_err(|e| PipelineError::Config(format!("tokens file: {e}")))?;
    let emb = load_embedding(emb_path)?;
    let table = Arc::new(LookupTable::from_embedding(&emb, days.iter().flatten().map(String::as_str)));
    let inputs = daily_inputs(&days, &table, cnn.input_days, cnn.max_len);
    let rv: Vec<f64> = recs.iter().map(|r| r.rv).collect();
    let dates: Vec<NaiveDate> = recs.iter().map(|r| r.date).collect();
    let outcome = train_rolling(&inputs, &rv, &dates, table, cnn, &cfg.protocol, t)?;
    let mut outs = Vec::new();
    let fc = format!("forecasts/{t}/{id}.csv");
    outcome.series.write_csv(&ensure_parent(dir, &fc)?)?;
    outs.push(fc);
    let mut index = Vec::new();
    for (k, ev) in outcome.events.iter().enumerate() {
        let ck = format!("models/{t}/{id}/event_{k:03}.ckpt");
        save_checkpoint(&ev.model, &ensure_parent(dir, &ck)?)?;
        index.push(EventIndex { checkpoint: ck.clone(), first_day: ev.days.start, last_day: ev.days.end - 1 });
        outs.push(ck);
    }
    let idx = format!("models/{t}/{id}/events.json");
    let json = serde_json::to_string_pretty(&index).map_err(|e| PipelineError::Config(e.to_string()))?;
    std::fs::write(ensure_parent(dir, &idx)?, json)?;
    outs.push(idx);
    Ok(outs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub ticker: String,
    pub model: String,
    pub panel: String,
    pub loss: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcRow {
    pub ticker: String,
    pub model: String,
    pub panel: String,
    pub loss: String,
    pub statistic: f64,
    pub p_value: f64,
}

pub const PANELS: [&str; 3] = ["all", "normal", "jump"];

/// Forecast series of one ticker: HAR benchmarks and CNN candidates.
pub fn load_forecasts(dir: &Path, cfg: &PipelineConfig, t: &str) -> Result<(Vec<ForecastSeries>, Vec<ForecastSeries>), PipelineError> {
    let har = if cfg.har.is_empty() {
        Vec::new()
    } else {
        ForecastSeries::read_csv(&dir.join(format!("forecasts/{t}/har.csv")), t)?
    };
    let mut cnn = Vec::new();
    for c in &cfg.cnn {
        cnn.extend(ForecastSeries::read_csv(&dir.join(format!("forecasts/{t}/{}.csv", c.model_id())), t)?);
    }
    Ok((har, cnn))
}

/// Scores every series on the all/normal/jump panels and runs the reality
/// check of each candidate against all benchmarks. Jump days are
/// classified on the out-of-sample actuals. `losses` pairs the label
/// written to the rows with the loss itself.
pub fn evaluate_ticker(
    ticker: &str,
    benchmarks: &[ForecastSeries],
    candidates: &[ForecastSeries],
    losses: &[(String, Loss)],
    rc: &RcConfig,
) -> Result<(Vec<ScoreRow>, Vec<RcRow>), PipelineError> {
    let mut scores = Vec::new();
    let mut rcs = Vec::new();
    let Some(first) = benchmarks.first().or(candidates.first()) else { return Ok((scores, rcs)) };
    let split = classify_days(&first.actual);
    let all: Vec<usize> = (0..first.len()).collect();
    for (panel, idx) in PANELS.iter().zip([&all, &split.normal, &split.jump]) {
        if idx.len() < 2 {
            continue;
        }
        for (lname, loss) in losses {
            for s in benchmarks.iter().chain(candidates) {
                scores.push(ScoreRow {
                    ticker: ticker.to_string(),
                    model: s.model_id.clone(),
                    panel: panel.to_string(),
                    loss: lname.clone(),
                    value: score(&s.subset(idx), *loss)?,
                });
            }
            if benchmarks.is_empty() {
                continue;
            }
            for c in candidates {
                let res = reality_check(c, benchmarks, *loss, Some(idx), rc)?;
                rcs.push(RcRow {
                    ticker: ticker.to_string(),
                    model: c.model_id.clone(),
                    panel: panel.to_string(),
                    loss: lname.clone(),
                    statistic: res.statistic,
                    p_value: res.p_value,
                });
            }
        }
    }
    Ok((scores, rcs))
}

/// Writes `scores.csv` and `rc.csv` into `dir`; returns their paths.
pub fn write_evaluation(dir: &Path, scores: &[ScoreRow], rcs: &[RcRow]) -> Result<[PathBuf; 2], PipelineError> {
    std::fs::create_dir_all(dir)?;
    let a = dir.join("scores.csv");
    let mut w = csv::Writer::from_path(&a)?;
    if scores.is_empty() {
        w.write_record(["ticker", "model", "panel", "loss", "value"])?;
    }
    for s in scores {
        w.serialize(s)?;
    }
    w.flush()?;
    let b = dir.join("rc.csv");
    let mut w = csv::Writer::from_path(&b)?;
    if rcs.is_empty() {
        w.write_record(["ticker", "model", "panel", "loss", "statistic", "p_value"])?;
    }
    for r in rcs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok([a, b])
}

fn eval_stage(dir: &Path, cfg: &PipelineConfig, losses: &[Loss]) -> Result<Vec<String>, PipelineError> {
    let labelled: Vec<(String, Loss)> =
        cfg.evaluation.losses.iter().map(|l| l.to_ascii_lowercase()).zip(losses.iter().copied()).collect();
    let mut scores = Vec::new();
    let mut rcs = Vec::new();
    for t in &cfg.tickers {
        let (har, cnn) = load_forecasts(dir, cfg, t)?;
        let (s, r) = evaluate_ticker(t, &har, &cnn, &labelled, &cfg.evaluation.rc)?;
        scores.extend(s);
        rcs.extend(r);
    }
    write_evaluation(&dir.join("eval"), &scores, &rcs)?;
    Ok(vec!["eval/scores.csv".into(), "eval/rc.csv".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AttributionRow {
    date: NaiveDate,
    ticker: String,
    token: String,
    slot: usize,
    value: f64,
    method: String,
    model: String,
}

fn explain_stage(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    let Some(ex) = &cfg.explain else { return Ok(Vec::new()) };
    let mut outs = Vec::new();
    for t in &cfg.tickers {
        let recs = read_records_csv(&dir.join(format!("rv/{t}.csv")))?;
        let days: Vec<Vec<String>> = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("tokens/{t}.json")))?)
            .map_err(|e| PipelineError::Config(format!("tokens file: {e}")))?;
        for c in &cfg.cnn {
            let id = c.model_id();
            let index: Vec<EventIndex> =
                serde_json::from_str(&std::fs::read_to_string(dir.join(format!("models/{t}/{id}/events.json")))?)
                    .map_err(|e| PipelineError::Config(format!("event index: {e}")))?;
            let mut rows = Vec::new();
            for ev in &index {
                let model = load_checkpoint(&dir.join(&ev.checkpoint))?;
                let inputs: Vec<SentenceMatrix> = (ev.first_day..=ev.last_day)
                    .map(|d| crate::nlpml::multi_day_input(&days[..d], c.input_days, &model.table, c.max_len))
                    .collect();
                let tracked: Vec<_> = (ev.first_day..=ev.last_day)
                    .zip(&inputs)
                    .map(|(d, inp)| (recs[d].date, &model, inp))
                    .collect();
                for tok in &ex.tokens {
                    for o in track_token(&tracked, tok, &ex.quadrature)? {
                        rows.push(AttributionRow {
                            date: o.date,
                            ticker: t.clone(),
                            token: tok.clone(),
                            slot: o.slot,
                            value: o.value,
                            method: "ig".into(),
                            model: id.clone(),
                        });
                    }
                }
            }
            rows.sort_by(|a, b| (a.date, &a.token, a.slot).cmp(&(b.date, &b.token, b.slot)));
            let out = format!("explain/{t}_{id}.csv");
            let mut w = csv::Writer::from_path(ensure_parent(dir, &out)?)?;
            if rows.is_empty() {
                w.write_record(["date", "ticker", "token", "slot", "value", "method", "model"])?;
            }
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
            outs.push(out);
        }
    }
    Ok(outs)
}
