//! Intraday price ingestion: `timestamp,price` CSV to per-session return
//! grids.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};
use chrono_tz::America::New_York;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::{IntradayDay, VolError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTick {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
}

/// Session window and sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionGrid {
    pub open: NaiveTime,
    pub close: NaiveTime,
    pub step_minutes: u32,
    /// Multiplier applied to log-returns (100 gives percentage returns).
    pub scale: f64,
}

impl Default for SessionGrid {
    fn default() -> Self {
        Self {
            open: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            step_minutes: 5,
            scale: 100.0,
        }
    }
}

impl SessionGrid {
    pub fn points(&self) -> Vec<NaiveTime> {
        let mut out = Vec::new();
        let mut t = self.open;
        while t <= self.close {
            out.push(t);
            t += chrono::Duration::minutes(self.step_minutes as i64);
        }
        out
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    // naive timestamps are New York wall-clock time
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .and_then(|n| New_York.from_local_datetime(&n).earliest())
        .map(|t| t.with_timezone(&Utc))
}

pub fn read_prices_csv(path: &Path) -> Result<Vec<PriceTick>, VolError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let ts = rec.get(0).ok_or(VolError::Price { line, msg: "missing timestamp".into() })?;
        let timestamp =
            parse_timestamp(ts.trim()).ok_or_else(|| VolError::Price { line, msg: format!("bad timestamp {ts:?}") })?;
        let p = rec.get(1).ok_or(VolError::Price { line, msg: "missing price".into() })?;
        let price: f64 = p.trim().parse().map_err(|_| VolError::Price { line, msg: format!("bad price {p:?}") })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(VolError::Price { line, msg: format!("price must be positive, got {price}") });
        }
        out.push(PriceTick { timestamp, price });
    }
    Ok(out)
}

pub fn write_prices_csv(path: &Path, ticks: &[PriceTick]) -> Result<(), VolError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "price"])?;
    for t in ticks {
        w.write_record([t.timestamp.to_rfc3339(), format!("{}", t.price)])?;
    }
    w.flush()?;
    Ok(())
}

/// Samples each session on the grid with previous-tick interpolation and
/// returns scaled log-returns. Grid points before the first tick of the
/// session take that first tick. Sessions with fewer than two ticks are
/// dropped.
pub fn intraday_returns(ticks: &[PriceTick], grid: &SessionGrid) -> Vec<IntradayDay> {
    let mut by_day: BTreeMap<NaiveDate, Vec<(NaiveTime, f64)>> = BTreeMap::new();
    for t in ticks {
        let local = t.timestamp.with_timezone::<Tz>(&New_York);
        let time = local.time();
        if time >= grid.open && time <= grid.close {
            by_day.entry(local.date_naive()).or_default().push((time, t.price));
        }
    }
    let points = grid.points();
    let mut out = Vec::new();
    for (date, mut obs) in by_day {
        if obs.len() < 2 {
            continue;
        }
        obs.sort_by_key(|o| o.0);
        let mut sampled = Vec::with_capacity(points.len());
        let mut j = 0;
        let mut last = obs[0].1;
        for &g in &points {
            while j < obs.len() && obs[j].0 <= g {
                last = obs[j].1;
                j += 1;
            }
            sampled.push(last);
        }
        let returns = sampled.windows(2).map(|w| grid.scale * (w[1] / w[0]).ln()).collect();
        out.push(IntradayDay { date, returns });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(s: &str, p: f64) -> PriceTick {
        PriceTick { timestamp: parse_timestamp(s).unwrap(), price: p }
    }

    #[test]
    fn grid_has_78_returns() {
        assert_eq!(SessionGrid::default().points().len(), 79);
    }

    #[test]
    fn previous_tick_sampling() {
        let ticks = vec![
            tick("2016-03-01 09:31:00", 100.0),
            tick("2016-03-01 09:40:00", 101.0),
            tick("2016-03-01 15:59:00", 99.0),
            tick("2016-03-01 17:00:00", 50.0), // after close
        ];
        let days = intraday_returns(&ticks, &SessionGrid::default());
        assert_eq!(days.len(), 1);
        let r = &days[0].returns;
        assert_eq!(r.len(), 78);
        // 09:30 and 09:35 both 100, 09:40 101
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 100.0 * (1.01f64).ln()).abs() < 1e-12);
        assert!((r.iter().sum::<f64>() - 100.0 * (0.99f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn timezone_handling() {
        // 14:30 UTC is 09:30 in New York during winter
        let a = parse_timestamp("2016-01-05T14:30:00Z").unwrap();
        let b = parse_timestamp("2016-01-05 09:30:00").unwrap();
        assert_eq!(a, b);
        // summer: 13:30 UTC
        assert_eq!(parse_timestamp("2016-07-05T13:30:00Z").unwrap(), parse_timestamp("2016-07-05 09:30").unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let ticks = vec![tick("2016-03-01 09:31:00", 100.5), tick("2016-03-01 09:45:00", 100.25)];
        write_prices_csv(&p, &ticks).unwrap();
        assert_eq!(read_prices_csv(&p).unwrap(), ticks);
        std::fs::write(&p, "timestamp,price\n2016-03-01 09:31:00,-1\n").unwrap();
        assert!(matches!(read_prices_csv(&p), Err(VolError::Price { line: 2, .. })));
    }
}
