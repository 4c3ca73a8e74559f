//! Summary tables of a finished run: loss differentials of each CNN
//! configuration against each HAR benchmark, averaged and medianed over
//! tickers, and the share of tickers where the reality check rejects.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::stats::median;

use super::config::PipelineConfig;
use super::run::{RcRow, ScoreRow, PANELS, RUN_CONFIG};
use super::PipelineError;

/// Benchmark used for the figure series when it is part of the run.
pub const FIGURE_BENCHMARK: &str = "char";

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub loss: String,
    pub panel: String,
    /// Column labels: candidate model ids.
    pub columns: Vec<String>,
    /// Row label and one value per column (`NaN` when no ticker has both).
    pub rows: Vec<(String, Vec<f64>)>,
}

fn lookup<'a>(scores: &'a [ScoreRow], loss: &str, panel: &str) -> BTreeMap<(&'a str, &'a str), f64> {
    scores
        .iter()
        .filter(|s| s.loss == loss && s.panel == panel)
        .map(|s| ((s.ticker.as_str(), s.model.as_str()), s.value))
        .collect()
}

/// Per-ticker differences `loss(candidate) - loss(benchmark)` over the
/// tickers that scored both.
pub fn ticker_deltas(scores: &[ScoreRow], loss: &str, panel: &str, candidate: &str, benchmark: &str) -> Vec<f64> {
    let m = lookup(scores, loss, panel);
    let mut tickers: Vec<&str> = m.keys().map(|k| k.0).collect();
    tickers.dedup();
    tickers
        .into_iter()
        .filter_map(|t| Some(m.get(&(t, candidate))? - m.get(&(t, benchmark))?))
        .collect()
}

/// Share of tickers (in percent) whose reality-check p-value is below
/// `level`, or `NaN` when the candidate has no result in this panel.
pub fn rc_percentage(rc: &[RcRow], loss: &str, panel: &str, candidate: &str, level: f64) -> f64 {
    let ps: Vec<f64> = rc
        .iter()
        .filter(|r| r.loss == loss && r.panel == panel && r.model == candidate)
        .map(|r| r.p_value)
        .collect();
    if ps.is_empty() {
        return f64::NAN;
    }
    100.0 * ps.iter().filter(|&&p| p < level).count() as f64 / ps.len() as f64
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One table per loss and panel: `avg`/`med` rows per benchmark and one
/// `rc_pct@level` row per significance level.
pub fn delta_table(
    scores: &[ScoreRow],
    rc: &[RcRow],
    loss: &str,
    panel: &str,
    candidates: &[String],
    benchmarks: &[String],
    levels: &[f64],
) -> DeltaTable {
    let mut rows = Vec::new();
    for b in benchmarks {
        let d: Vec<Vec<f64>> = candidates.iter().map(|c| ticker_deltas(scores, loss, panel, c, b)).collect();
        rows.push((format!("avg_delta_{b}"), d.iter().map(|x| mean(x)).collect()));
        rows.push((format!("med_delta_{b}"), d.iter().map(|x| if x.is_empty() { f64::NAN } else { median(x) }).collect()));
    }
    for &a in levels {
        rows.push((format!("rc_pct@{a}"), candidates.iter().map(|c| rc_percentage(rc, loss, panel, c, a)).collect()));
    }
    DeltaTable { loss: loss.to_string(), panel: panel.to_string(), columns: candidates.to_vec(), rows }
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct LongRow<'a> {
    loss: &'a str,
    panel: &'a str,
    row: &'a str,
    model: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct FigureRow<'a> {
    model: &'a str,
    rc_pct: f64,
    avg_delta: f64,
    med_delta: f64,
}

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.4}")
    }
}

/// Writes `report/tables.csv` (long format), one figure CSV per loss and
/// panel and `report/summary.md` from the run's evaluation files. Returns
/// the written paths relative to `run_dir`.
pub fn emit_report(run_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let cfg = PipelineConfig::from_toml(&std::fs::read_to_string(run_dir.join(RUN_CONFIG))?)?;
    let scores: Vec<ScoreRow> = read_rows(&run_dir.join("eval/scores.csv"))?;
    let rc: Vec<RcRow> = read_rows(&run_dir.join("eval/rc.csv"))?;
    let candidates: Vec<String> = cfg.cnn.iter().map(|c| c.model_id()).collect();
    let benchmarks: Vec<String> = cfg.har.iter().map(|h| h.name().to_string()).collect();
    let levels = &cfg.evaluation.levels;
    let fig_bench = benchmarks.iter().find(|b| *b == FIGURE_BENCHMARK).or(benchmarks.first());

    std::fs::create_dir_all(run_dir.join("report"))?;
    let mut outs = Vec::new();
    let mut md = String::from("# Run summary\n\n");
    let _ = writeln!(md, "Tickers: {}. Seed: {}.\n", cfg.tickers.join(", "), cfg.seed);
    let mut long = csv::Writer::from_path(run_dir.join("report/tables.csv"))?;
    for loss in &cfg.evaluation.losses {
        let loss = &loss.to_ascii_lowercase();
        for panel in PANELS {
            let t = delta_table(&scores, &rc, loss, panel, &candidates, &benchmarks, levels);
            for (label, vals) in &t.rows {
                for (model, &value) in t.columns.iter().zip(vals) {
                    long.serialize(LongRow { loss, panel, row: label, model, value })?;
                }
            }
            if t.columns.is_empty() {
                continue;
            }
            let _ = writeln!(md, "## {loss}, {panel} days\n");
            let _ = writeln!(md, "| | {} |", t.columns.join(" | "));
            let _ = writeln!(md, "|---|{}", "---|".repeat(t.columns.len()));
            for (label, vals) in &t.rows {
                let cells: Vec<String> = vals.iter().map(|&v| fmt_cell(v)).collect();
                let _ = writeln!(md, "| {label} | {} |", cells.join(" | "));
            }
            md.push('\n');

            if let (Some(b), Some(&level)) = (fig_bench, levels.first()) {
                let rel = format!("report/figure_{loss}_{panel}.csv");
                let mut w = csv::Writer::from_path(run_dir.join(&rel))?;
                for c in &candidates {
                    let d = ticker_deltas(&scores, loss, panel, c, b);
                    w.serialize(FigureRow {
                        model: c,
                        rc_pct: rc_percentage(&rc, loss, panel, c, level),
                        avg_delta: mean(&d),
                        med_delta: if d.is_empty() { f64::NAN } else { median(&d) },
                    })?;
                }
                w.flush()?;
                outs.push(rel);
            }
        }
    }
    long.flush()?;
    outs.push("report/tables.csv".into());
    std::fs::write(run_dir.join("report/summary.md"), md)?;
    outs.push("report/summary.md".into());
    Ok(outs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: &str, m: &str, v: f64) -> ScoreRow {
        ScoreRow { ticker: t.into(), model: m.into(), panel: "all".into(), loss: "mse".into(), value: v }
    }

    #[test]
    fn model_against_itself_is_zero() {
        let scores = vec![row("A", "x", 1.5), row("B", "x", 2.0), row("A", "y", 1.0), row("B", "y", 3.0)];
        let t = delta_table(&scores, &[], "mse", "all", &["x".into()], &["x".into()], &[0.05]);
        assert_eq!(t.rows[0].1, vec![0.0]);
        assert_eq!(t.rows[1].1, vec![0.0]);
        assert!(t.rows[2].1[0].is_nan());
        let t = delta_table(&scores, &[], "mse", "all", &["x".into()], &["y".into()], &[0.05]);
        assert_eq!(t.rows[0].1, vec![-0.25]);
    }

    #[test]
    fn rc_percentage_counts_rejections() {
        let rc: Vec<RcRow> = [0.01, 0.2, 0.04, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &p)| RcRow {
                ticker: format!("T{i}"),
                model: "m".into(),
                panel: "jump".into(),
                loss: "qlike".into(),
                statistic: 0.0,
                p_value: p,
            })
            .collect();
        assert_eq!(rc_percentage(&rc, "qlike", "jump", "m", 0.05), 50.0);
        assert_eq!(rc_percentage(&rc, "qlike", "jump", "m", 0.3), 75.0);
        assert!(rc_percentage(&rc, "mse", "jump", "m", 0.05).is_nan());
    }
}
