use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::TrainConfig;
use crate::evaluation::{Loss, RcConfig};
use crate::explain::QuadratureSpec;
use crate::nlpml::CnnConfig;
use crate::volatility::{HarModel, RollingProtocol, SessionGrid};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// News records, one JSON object per line.
    pub news: PathBuf,
    /// Intraday price file per ticker; `{ticker}` is replaced by the symbol.
    pub prices: String,
    /// Cleaning rule catalogue; the bundled one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    /// Pretrained embedding; trained from the headlines when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<PathBuf>,
    /// Directory that receives one subdirectory per run.
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub losses: Vec<String>,
    pub rc: RcConfig,
    /// Significance levels at which reality-check rejections are counted.
    pub levels: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { losses: vec!["mse".into(), "qlike".into(), "mda".into()], rc: RcConfig::default(), levels: vec![0.05, 0.10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainConfig {
    /// Tokens tracked through the out-of-sample period.
    pub tokens: Vec<String>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed copied into every seeded component.
    pub seed: u64,
    #[serde(default = "yes")]
    pub strict: bool,
    pub tickers: Vec<String>,
    pub paths: Paths,
    /// Intraday sampling used for the realized measures.
    #[serde(default)]
    pub session: SessionGrid,
    #[serde(default)]
    pub protocol: RollingProtocol,
    #[serde(default)]
    pub embedding: TrainConfig,
    #[serde(default = "default_har")]
    pub har: Vec<HarModel>,
    #[serde(default)]
    pub cnn: Vec<CnnConfig>,
    #[serde(default)]
    pub evaluation: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explain: Option<ExplainConfig>,
}

fn yes() -> bool {
    true
}

fn default_har() -> Vec<HarModel> {
    HarModel::ALL.to_vec()
}

impl PipelineConfig {
    /// Parses TOML; syntax and schema errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Loads a config file and resolves relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.news);
        fix(&mut self.paths.output);
        if let Some(r) = self.paths.rules.as_mut() {
            fix(r);
        }
        if let Some(e) = self.paths.embedding.as_mut() {
            fix(e);
        }
        if Path::new(&self.paths.prices).is_relative() {
            self.paths.prices = base.join(&self.paths.prices).to_string_lossy().into_owned();
        }
    }

    pub fn price_path(&self, ticker: &str) -> PathBuf {
        PathBuf::from(self.paths.prices.replace("{ticker}", ticker))
    }

    pub fn losses(&self) -> Result<Vec<Loss>, PipelineError> {
        self.evaluation.losses.iter().map(|l| l.parse().map_err(PipelineError::Config)).collect()
    }

    /// Copies the master seed into the component configs and applies the
    /// strict single-worker embedding mode.
    pub fn seeded(&self) -> Self {
        let mut c = self.clone();
        c.embedding.seed = self.seed;
        if self.strict {
            c.embedding.threads = 1;
        }
        for cnn in &mut c.cnn {
            cnn.seed = self.seed;
        }
        c.evaluation.rc.seed = self.seed;
        c
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.tickers.is_empty() {
            return err("ticker list is empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tickers {
            if t.is_empty() || !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-') {
                return err(format!("invalid ticker {t:?}"));
            }
            if !seen.insert(t) {
                return err(format!("ticker {t} listed twice"));
            }
            let p = self.price_path(t);
            if !p.is_file() {
                return err(format!("price file for {t} not found: {}", p.display()));
            }
        }
        if !self.paths.news.is_file() {
            return err(format!("news file not found: {}", self.paths.news.display()));
        }
        for p in self.paths.rules.iter().chain(&self.paths.embedding) {
            if !p.is_file() {
                return err(format!("file not found: {}", p.display()));
            }
        }
        if self.protocol.train_len == 0 || self.protocol.oos_len == 0 {
            return err("protocol lengths must be positive".into());
        }
        if self.har.is_empty() && self.cnn.is_empty() {
            return err("no models configured".into());
        }
        for (i, c) in self.cnn.iter().enumerate() {
            c.validate().map_err(|e| PipelineError::Config(format!("cnn[{i}]: {e}")))?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.cnn {
            if !ids.insert(c.model_id()) {
                return err(format!("duplicate CNN configuration {}", c.model_id()));
            }
        }
        self.losses()?;
        if self.evaluation.levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return err("evaluation.levels must lie in (0, 1)".into());
        }
        if self.evaluation.rc.n_boot == 0 || !(self.evaluation.rc.avg_block >= 1.0) {
            return err("reality check needs n_boot > 0 and avg_block >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
tickers = ["AAA", "BBB"]

[paths]
news = "news.jsonl"
prices = "prices/{ticker}.csv"
output = "runs"

[protocol]
train_len = 200
oos_len = 30

[embedding]
dim = 16
min_count = 1

[[cnn]]
filters = 3
widths = [3, 4, 5]

[[cnn]]
filters = 8
widths = [3, 4, 5]
alpha_unused = 1
"#;

    #[test]
    fn schema_errors_have_positions() {
        let e = PipelineConfig::from_toml(SAMPLE).unwrap_err().to_string();
        assert!(e.contains("alpha_unused"), "{e}");
        assert!(e.contains("line 25, column 1"), "{e}");
    }

    #[test]
    fn round_trip_is_lossless() {
        let text = SAMPLE.replace("alpha_unused = 1\n", "");
        let c = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(c.cnn.len(), 2);
        assert_eq!(c.har.len(), 8);
        assert!(c.strict);
        let back = PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_tickers_rejected() {
        let text = SAMPLE.replace("alpha_unused = 1\n", "").replace(r#"["AAA", "BBB"]"#, "[]");
        let c = PipelineConfig::from_toml(&text).unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::Config(m)) if m.contains("empty")));
    }
}
