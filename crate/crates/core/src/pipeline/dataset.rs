use std::path::Path;

use crate::synth::{generate_synthetic, SynthError, SynthSpec};
use crate::textprep::write_news_jsonl;
use crate::volatility::write_prices_csv;

use super::config::{Paths, PipelineConfig};
use super::PipelineError;

/// Significance level of the generator self-test gate.
pub const SELF_TEST_ALPHA: f64 = 0.01;

/// Writes a multi-ticker synthetic dataset into `dir`: one shared
/// `news.jsonl`, `prices/{ticker}.csv`, `labels/{ticker}.csv` and a
/// `config.toml` with HAR benchmarks only. Ticker `i` uses seed
/// `base.seed + i`. Every ticker must pass the generator self-test.
pub fn write_synthetic_dataset(dir: &Path, base: &SynthSpec, tickers: &[String]) -> Result<PipelineConfig, PipelineError> {
    if tickers.is_empty() {
        return Err(PipelineError::Config("ticker list is empty".into()));
    }
    std::fs::create_dir_all(dir.join("prices"))?;
    std::fs::create_dir_all(dir.join("labels"))?;
    let mut news = Vec::new();
    for (i, t) in tickers.iter().enumerate() {
        let spec = SynthSpec { ticker: t.clone(), seed: base.seed + i as u64, ..base.clone() };
        let data = generate_synthetic(&spec)?;
        let st = data.self_test()?;
        if !st.passed(SELF_TEST_ALPHA) {
            return Err(SynthError::Spec(format!(
                "{t}: generator self-test failed ({} jump days, p = {:.3e})",
                st.n_jump, st.p_value
            ))
            .into());
        }
        write_prices_csv(&dir.join(format!("prices/{t}.csv")), &data.prices)?;
        data.write_labels(&dir.join(format!("labels/{t}.csv")))?;
        news.extend(data.news);
    }
    news.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    write_news_jsonl(&dir.join("news.jsonl"), &news)?;

    let cfg = PipelineConfig {
        seed: base.seed,
        strict: true,
        tickers: tickers.to_vec(),
        paths: Paths {
            news: "news.jsonl".into(),
            prices: "prices/{ticker}.csv".into(),
            rules: None,
            embedding: None,
            output: "runs".into(),
        },
        session: base.grid(),
        protocol: Default::default(),
        embedding: Default::default(),
        har: crate::volatility::HarModel::ALL.to_vec(),
        cnn: Vec::new(),
        evaluation: Default::default(),
        explain: None,
    };
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(cfg)
}
