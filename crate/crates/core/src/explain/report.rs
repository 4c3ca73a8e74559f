use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::nlpml::{CnnModel, SentenceMatrix, OOV_ROW};

use super::ig::integrated_gradients;
use super::{AttributionVector, ExplainError, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Html,
}

impl ReportFormat {
    /// HTML for `.html`/`.htm` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm") => ReportFormat::Html,
            _ => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportMeta {
    pub date: Option<NaiveDate>,
    pub ticker: String,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    date: String,
    ticker: &'a str,
    token: &'a str,
    slot: usize,
    value: f64,
    method: &'static str,
}

/// Writes one row (CSV) or one coloured span (HTML) per real token. Red
/// marks tokens that raise the forecast, blue tokens that lower it, with
/// opacity `|a| / max |a|`.
pub fn token_report(
    attr: &AttributionVector,
    tokens: &[String],
    meta: &ReportMeta,
    path: &Path,
    format: ReportFormat,
) -> Result<(), ExplainError> {
    let n = tokens.len().min(attr.values.len());
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            let date = meta.date.map(|d| d.to_string()).unwrap_or_default();
            for (slot, tok) in tokens[..n].iter().enumerate() {
                w.serialize(CsvRow {
                    date: date.clone(),
                    ticker: &meta.ticker,
                    token: tok,
                    slot,
                    value: attr.values[slot],
                    method: attr.method.name(),
                })?;
            }
            w.flush()?;
        }
        ReportFormat::Html => std::fs::write(path, render_html(attr, &tokens[..n], meta))?,
    }
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render_html(attr: &AttributionVector, tokens: &[String], meta: &ReportMeta) -> String {
    let max = attr.values[..tokens.len()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let title = format!(
        "{} {} {}",
        escape(&meta.ticker),
        meta.date.map(|d| d.to_string()).unwrap_or_default(),
        attr.method.name()
    );
    let mut s = String::new();
    let _ = write!(
        s,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head>\n\
         <body style=\"font-family:sans-serif;max-width:60em;margin:2em auto\">\n\
         <h3>{title}</h3>\n<p>forecast {:.6}, baseline {:.6}</p>\n<p style=\"line-height:2.2\">\n",
        attr.output, attr.baseline_value
    );
    for (slot, tok) in tokens.iter().enumerate() {
        let a = attr.values[slot];
        let style = if a == 0.0 || max == 0.0 {
            String::new()
        } else {
            let (r, g, b) = if a > 0.0 { (214, 39, 40) } else { (31, 119, 180) };
            format!(" style=\"background-color:rgba({r},{g},{b},{:.3});padding:2px\"", a.abs() / max)
        };
        let _ = writeln!(s, "<span{style} title=\"{a:.6e}\">{}</span>", escape(tok));
    }
    s.push_str("</p>\n</body></html>\n");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenOccurrence {
    pub date: NaiveDate,
    pub slot: usize,
    pub value: f64,
}

/// Integrated Gradients attribution of every occurrence of `token`, each
/// day explained by the model in force that day.
pub fn track_token(
    days: &[(NaiveDate, &CnnModel, &SentenceMatrix)],
    token: &str,
    quad: &QuadratureSpec,
) -> Result<Vec<TokenOccurrence>, ExplainError> {
    let per_day = days
        .par_iter()
        .map(|&(date, model, input)| {
            let id = model.table.id(token);
            if id <= OOV_ROW || input.no_news {
                return Ok(Vec::new());
            }
            let slots: Vec<usize> = (0..input.n_real).filter(|&i| input.token_ids[i] == id).collect();
            if slots.is_empty() {
                return Ok(Vec::new());
            }
            let attr = integrated_gradients(model, input, quad)?;
            Ok(slots.into_iter().map(|slot| TokenOccurrence { date, slot, value: attr.values[slot] }).collect())
        })
        .collect::<Result<Vec<Vec<_>>, ExplainError>>()?;
    Ok(per_day.into_iter().flatten().collect())
}

/// Occurrences that raise, lower, or leave the forecast unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceCounts {
    pub increase: usize,
    pub decrease: usize,
    pub zero: usize,
}

pub fn summarize_occurrences(occ: &[TokenOccurrence]) -> OccurrenceCounts {
    let mut c = OccurrenceCounts::default();
    for o in occ {
        if o.value > 0.0 {
            c.increase += 1;
        } else if o.value < 0.0 {
            c.decrease += 1;
        } else {
            c.zero += 1;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::super::Method;
    use super::*;

    fn attr(values: Vec<f64>) -> AttributionVector {
        AttributionVector { values, baseline_value: 0.0, output: 1.0, method: Method::Ig, std_errors: None }
    }

    #[test]
    fn csv_has_one_row_per_real_token() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let toks: Vec<String> = ["loss", "profit", "deal"].iter().map(|s| s.to_string()).collect();
        let mut v = vec![0.0; 10];
        v[..3].copy_from_slice(&[0.5, -0.25, 0.0]);
        let meta = ReportMeta { date: NaiveDate::from_ymd_opt(2016, 10, 26), ticker: "AAPL".into() };
        token_report(&attr(v), &toks, &meta, &p, ReportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "date,ticker,token,slot,value,method");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "2016-10-26,AAPL,loss,0,0.5,ig");
    }

    #[test]
    fn html_colours() {
        let toks: Vec<String> = ["a<b", "up", "down", "flat"].iter().map(|s| s.to_string()).collect();
        let html = render_html(&attr(vec![0.1, 0.4, -0.2, 0.0]), &toks, &ReportMeta::default());
        assert!(html.contains("a&lt;b"));
        assert!(html.contains("rgba(214,39,40,1.000)"));
        assert!(html.contains("rgba(31,119,180,0.500)"));
        assert!(html.contains("<span title=\"0.000000e0\">flat</span>"));
        let zero = render_html(&attr(vec![0.0; 4]), &toks, &ReportMeta::default());
        assert!(!zero.contains("rgba"));
        assert_eq!(ReportFormat::from_path(Path::new("x.HTML")), ReportFormat::Html);
    }

    #[test]
    fn zero_is_its_own_bucket() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let occ: Vec<TokenOccurrence> =
            [0.3, -0.1, 0.0, 0.2].iter().map(|&value| TokenOccurrence { date: d, slot: 0, value }).collect();
        assert_eq!(summarize_occurrences(&occ), OccurrenceCounts { increase: 2, decrease: 1, zero: 1 });
    }
}
