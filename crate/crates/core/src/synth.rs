//! Synthetic market and news data with known jump days, for end-to-end
//! checks of the forecasting and attribution pipeline.
//!
//! Daily log-variance follows a Gaussian AR(1); each intraday return is
//! normal with the day's variance spread evenly over the session. Jump days
//! arrive as a Bernoulli process and add one large return at a random
//! intraday slot. Headlines are drawn from a fixed pseudo-word vocabulary,
//! and with probability `p_signal` the marker token is planted in the news
//! window that closes at the jump day's open.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone, Utc, Weekday};
use chrono_tz::America::New_York;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};
use thiserror::Error;

use crate::textprep::{write_news_jsonl, RawNewsItem, TextError};
use crate::volatility::{compute_records, intraday_returns, write_prices_csv, PriceTick, SessionGrid, VolError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Vol(#[from] VolError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub ticker: String,
    pub n_days: usize,
    pub start: NaiveDate,
    /// Intraday returns per session (390 minutes must divide evenly).
    pub intraday_returns: usize,
    /// Unconditional daily return standard deviation, in percent.
    pub base_vol: f64,
    /// AR(1) coefficient of daily log-variance.
    pub persistence: f64,
    /// Innovation standard deviation of daily log-variance.
    pub vol_of_vol: f64,
    /// Probability that a day carries a jump.
    pub jump_intensity: f64,
    /// Typical absolute jump return, in percent.
    pub jump_size: f64,
    /// Mean number of headlines per news window (Poisson).
    pub headlines_per_day: f64,
    pub words_per_headline: usize,
    pub vocab_size: usize,
    pub marker: String,
    /// Probability that the marker precedes a jump day.
    pub p_signal: f64,
    /// Probability that the marker shows up before an ordinary day.
    pub p_false_signal: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            ticker: "SYN".into(),
            n_days: 1100,
            start: NaiveDate::from_ymd_opt(2012, 1, 3).expect("valid date"),
            intraday_returns: 78,
            base_vol: 1.0,
            persistence: 0.9,
            vol_of_vol: 0.1,
            jump_intensity: 0.1,
            jump_size: 10.0,
            headlines_per_day: 2.0,
            words_per_headline: 6,
            vocab_size: 200,
            marker: "selloff".into(),
            p_signal: 0.9,
            p_false_signal: 0.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    /// Rejects NaN as well as out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.to_string()));
        if self.n_days < 2 {
            return bad("n_days must be at least 2");
        }
        if self.intraday_returns == 0 || 390 % self.intraday_returns != 0 {
            return bad("intraday_returns must divide 390");
        }
        if !(self.base_vol > 0.0) || !(self.jump_size >= 0.0) || !(self.vol_of_vol >= 0.0) {
            return bad("volatility parameters must be positive");
        }
        if !(self.persistence.abs() < 1.0) {
            return bad("persistence must lie in (-1, 1)");
        }
        for (name, p) in [
            ("jump_intensity", self.jump_intensity),
            ("p_signal", self.p_signal),
            ("p_false_signal", self.p_false_signal),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Spec(format!("{name} must be a probability")));
            }
        }
        if self.vocab_size == 0 || self.words_per_headline == 0 || !(self.headlines_per_day >= 0.0) {
            return bad("news model needs a vocabulary and positive sizes");
        }
        if self.marker.is_empty() || !self.marker.chars().all(|c| c.is_ascii_lowercase()) {
            return bad("marker must be a lowercase word");
        }
        Ok(())
    }

    pub fn step_minutes(&self) -> u32 {
        (390 / self.intraday_returns) as u32
    }

    pub fn grid(&self) -> SessionGrid {
        SessionGrid { step_minutes: self.step_minutes(), ..SessionGrid::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub spec: SynthSpec,
    /// Trading days (weekdays).
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<PriceTick>,
    pub news: Vec<RawNewsItem>,
    /// Day `t` carries a jump.
    pub jump_days: Vec<bool>,
    /// The marker appears in the news window that closes at day `t`'s open.
    pub signal_days: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    date: NaiveDate,
    jump: u8,
    signal: u8,
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Pronounceable pseudo-words that survive headline cleaning.
fn vocabulary(n: usize, marker: &str) -> Vec<String> {
    const ON: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
    const NU: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while out.len() < n {
        let mut w = String::new();
        let mut k = i;
        for _ in 0..3 {
            w.push_str(ON[k % ON.len()]);
            k /= ON.len();
            w.push_str(NU[k % NU.len()]);
            k /= NU.len();
        }
        if w != marker {
            out.push(w);
        }
        i += 1;
    }
    out
}

fn ny(date: NaiveDate, time: NaiveTime) -> DateTime<Utc> {
    New_York.from_local_datetime(&date.and_time(time)).earliest().expect("session time exists").with_timezone(&Utc)
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_days;
    let dates = trading_days(spec.start, n);
    let open = NaiveTime::from_hms_opt(9, 30, 0).expect("valid time");
    let step = spec.step_minutes() as i64;
    let m = spec.intraday_returns;

    // daily log-variance in squared-percent units, mean matched to base_vol²
    let sd = spec.vol_of_vol / (1.0 - spec.persistence * spec.persistence).sqrt();
    let mu = (spec.base_vol * spec.base_vol).ln() - 0.5 * sd * sd;
    let mut h = mu + sd * rng.sample::<f64, _>(StandardNormal);
    let jump_days: Vec<bool> = (0..n).map(|t| t > 0 && rng.gen_bool(spec.jump_intensity)).collect();

    let mut prices = Vec::with_capacity(n * (m + 1));
    let mut log_p = 100f64.ln();
    for (t, &day) in dates.iter().enumerate() {
        if t > 0 {
            h = mu + spec.persistence * (h - mu) + spec.vol_of_vol * rng.sample::<f64, _>(StandardNormal);
        }
        let per_step = (h.exp() / m as f64).sqrt();
        let jump_slot = rng.gen_range(0..m);
        prices.push(PriceTick { timestamp: ny(day, open), price: log_p.exp() });
        for k in 0..m {
            let mut r = per_step * rng.sample::<f64, _>(StandardNormal);
            if jump_days[t] && k == jump_slot {
                let size = spec.jump_size * rng.gen_range(0.75..1.25);
                r += if rng.gen_bool(0.5) { size } else { -size };
            }
            log_p += r / 100.0;
            let ts = ny(day, open + Duration::minutes(step * (k as i64 + 1)));
            prices.push(PriceTick { timestamp: ts, price: log_p.exp() });
        }
    }

    // news: the window of day t is [t 09:30, t+1 09:30) New York; the marker
    // for a signal on day t+1 goes into window t, which closes before t+1's
    // session because trading days are at least one calendar day apart
    let vocab = vocabulary(spec.vocab_size, &spec.marker);
    let poisson = (spec.headlines_per_day > 0.0).then(|| Poisson::new(spec.headlines_per_day).expect("positive mean"));
    let mut signal_days = vec![false; n];
    let mut news = Vec::new();
    let offset = FixedOffset::east_opt(0).expect("utc offset");
    let tag: BTreeSet<String> = [format!("about:{}", spec.ticker.to_lowercase())].into_iter().collect();
    for t in 0..n.saturating_sub(1) {
        let next = t + 1;
        let p = if jump_days[next] { spec.p_signal } else { spec.p_false_signal };
        signal_days[next] = rng.gen_bool(p);
        let count = poisson.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
        let mut headlines: Vec<Vec<String>> = (0..count)
            .map(|_| (0..spec.words_per_headline).map(|_| vocab.choose(&mut rng).expect("vocabulary").clone()).collect())
            .collect();
        if signal_days[next] {
            if headlines.is_empty() {
                headlines.push((0..spec.words_per_headline).map(|_| vocab.choose(&mut rng).expect("vocabulary").clone()).collect());
            }
            let hl = rng.gen_range(0..headlines.len());
            let pos = rng.gen_range(0..=headlines[hl].len());
            headlines[hl].insert(pos, spec.marker.clone());
        }
        let start = ny(dates[t], open);
        let window_secs = (ny(dates[t] + Duration::days(1), open) - start).num_seconds();
        let mut stamps: Vec<i64> = (0..headlines.len()).map(|_| rng.gen_range(0..window_secs)).collect();
        stamps.sort_unstable();
        for (k, (words, s)) in headlines.into_iter().zip(stamps).enumerate() {
            let mut text = words.join(" ");
            while text.len() < 30 {
                text.push(' ');
                text.push_str(vocab.choose(&mut rng).expect("vocabulary"));
            }
            news.push(RawNewsItem {
                id: format!("{}-{t}-{k}", spec.ticker.to_lowercase()),
                timestamp: (start + Duration::seconds(s)).with_timezone(&offset),
                headline: text,
                body: String::new(),
                tags: tag.clone(),
            });
        }
    }
    Ok(SynthData { spec: spec.clone(), dates, prices, news, jump_days, signal_days })
}

/// Generator self-test: Mann-Whitney test that realized variance on
/// labelled jump days exceeds that on normal days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTest {
    pub n_jump: usize,
    pub n_normal: usize,
    pub u_statistic: f64,
    /// One-sided p-value (normal approximation with tie correction).
    pub p_value: f64,
    pub all_rv_positive: bool,
}

impl SelfTest {
    pub fn passed(&self, alpha: f64) -> bool {
        self.all_rv_positive && self.p_value < alpha
    }
}

pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    if x.is_empty() || y.is_empty() {
        return (0.0, 1.0);
    }
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = crate::stats::average_ranks(&all);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    // tie correction
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - ties / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return (u, 1.0);
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    (u, 1.0 - NormalDist::standard().cdf(z))
}

impl SynthData {
    pub fn daily_records(&self) -> Result<Vec<crate::volatility::DailyVolRecord>, SynthError> {
        Ok(compute_records(&intraday_returns(&self.prices, &self.spec.grid()))?)
    }

    pub fn self_test(&self) -> Result<SelfTest, SynthError> {
        let recs = self.daily_records()?;
        let (mut jump, mut normal) = (Vec::new(), Vec::new());
        for (r, &j) in recs.iter().zip(&self.jump_days) {
            if j {
                jump.push(r.rv);
            } else {
                normal.push(r.rv);
            }
        }
        let (u, p) = mann_whitney_greater(&jump, &normal);
        Ok(SelfTest {
            n_jump: jump.len(),
            n_normal: normal.len(),
            u_statistic: u,
            p_value: p,
            all_rv_positive: recs.iter().all(|r| r.rv > 0.0) && recs.len() == self.dates.len(),
        })
    }

    /// Writes `prices.csv`, `news.jsonl` and `labels.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        write_prices_csv(&dir.join("prices.csv"), &self.prices)?;
        write_news_jsonl(&dir.join("news.jsonl"), &self.news)?;
        self.write_labels(&dir.join("labels.csv"))
    }

    /// Ground-truth labels, one row per day: `date,jump,signal`.
    pub fn write_labels(&self, path: &Path) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_path(path)?;
        for ((d, &j), &s) in self.dates.iter().zip(&self.jump_days).zip(&self.signal_days) {
            w.serialize(LabelRow { date: *d, jump: j as u8, signal: s as u8 })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads `labels.csv` back as `(date, jump, signal)` triples.
pub fn read_labels(path: &Path) -> Result<Vec<(NaiveDate, bool, bool)>, SynthError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<LabelRow>()
        .map(|row| row.map(|l| (l.date, l.jump == 1, l.signal == 1)).map_err(SynthError::from))
        .collect()
}
