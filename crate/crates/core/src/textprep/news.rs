//! Line-delimited news records and daily headline aggregation.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::{clean_text, tokenize, PhraseModel, RuleSet, TextError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNewsItem {
    pub id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub headline: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl RawNewsItem {
    pub fn has_tags(&self, required: &[String]) -> bool {
        required.iter().all(|t| self.tags.contains(t))
    }
}

/// Tag query used to select the news stream for a ticker or topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagFilter {
    pub all_of: Vec<String>,
}

impl TagFilter {
    /// `about:<ticker>` stock-related stream.
    pub fn about(ticker: &str) -> Self {
        Self { all_of: vec![format!("about:{}", ticker.to_lowercase())] }
    }

    /// `hot` stories with `politics` as subject.
    pub fn hot_politics() -> Self {
        Self { all_of: vec!["hot".into(), "subject:politics".into()] }
    }

    pub fn tag(tag: &str) -> Self {
        Self { all_of: vec![tag.to_lowercase()] }
    }

    pub fn matches(&self, item: &RawNewsItem) -> bool {
        item.has_tags(&self.all_of)
    }
}

pub fn read_news_jsonl(path: &Path) -> Result<Vec<RawNewsItem>, TextError> {
    let file = std::fs::File::open(path)?;
    let mut items = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut item: RawNewsItem =
            serde_json::from_str(&line).map_err(|e| TextError::Record { line: i + 1, msg: e.to_string() })?;
        item.tags = item.tags.into_iter().map(|t| t.to_lowercase()).collect();
        items.push(item);
    }
    Ok(items)
}

pub fn write_news_jsonl(path: &Path, items: &[RawNewsItem]) -> Result<(), TextError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| TextError::Record { line: 0, msg: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Drop exact duplicates (same headline and body) and items lacking a
/// headline or a body, then sort by timestamp (stable).
pub fn dedup_and_sort(items: Vec<RawNewsItem>) -> Vec<RawNewsItem> {
    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<RawNewsItem> = items
        .into_iter()
        .filter(|it| !it.headline.trim().is_empty() && !it.body.trim().is_empty())
        .filter(|it| seen.insert((it.headline.clone(), it.body.clone())))
        .collect();
    out.sort_by_key(|it| it.timestamp);
    out
}

/// Daily news window: `[day cutoff, day+1 cutoff)` in a market timezone.
#[derive(Debug, Clone, Copy)]
pub struct DayWindow {
    pub cutoff: NaiveTime,
    pub tz: Tz,
}

impl Default for DayWindow {
    fn default() -> Self {
        Self {
            cutoff: NaiveTime::from_hms_opt(9, 30, 0).expect("valid time"),
            tz: chrono_tz::America::New_York,
        }
    }
}

impl DayWindow {
    fn local_instant(&self, day: NaiveDate) -> DateTime<Utc> {
        let naive = day.and_time(self.cutoff);
        match self.tz.from_local_datetime(&naive) {
            chrono::LocalResult::Single(t) => t.with_timezone(&Utc),
            chrono::LocalResult::Ambiguous(a, _) => a.with_timezone(&Utc),
            // cutoff inside a DST gap: shift forward one hour
            chrono::LocalResult::None => self
                .tz
                .from_local_datetime(&(naive + Duration::hours(1)))
                .earliest()
                .expect("time after DST gap exists")
                .with_timezone(&Utc),
        }
    }

    pub fn bounds(&self, day: NaiveDate) -> (DateTime<Utc>, DateTime<Utc>) {
        (self.local_instant(day), self.local_instant(day + Duration::days(1)))
    }

    /// The trading day whose window contains `ts`.
    pub fn day_of(&self, ts: DateTime<FixedOffset>) -> NaiveDate {
        let local = ts.with_timezone(&self.tz);
        let d = local.date_naive();
        if local.time() < self.cutoff {
            d - Duration::days(1)
        } else {
            d
        }
    }
}

/// Clean/tokenize/phrase pipeline for headlines.
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct HeadlineProcessor {
    pub rules: RuleSet,
    pub phrases: Option<PhraseModel>,
    pub window: DayWindow,
}


impl HeadlineProcessor {
    /// Tokens of one headline; headlines rejected by the cleaner give none.
    pub fn headline_tokens(&self, headline: &str) -> Vec<String> {
        let Ok(clean) = clean_text(headline, &self.rules) else {
            return Vec::new();
        };
        tokenize(&clean)
            .into_iter()
            .flat_map(|s| match &self.phrases {
                Some(p) => p.apply(&s),
                None => s,
            })
            .collect()
    }

    pub fn aggregate(&self, items: &[RawNewsItem], filter: &TagFilter, day: NaiveDate) -> Vec<String> {
        let (start, end) = self.window.bounds(day);
        let mut selected: Vec<&RawNewsItem> = items
            .iter()
            .filter(|it| filter.matches(it))
            .filter(|it| {
                let t = it.timestamp.with_timezone(&Utc);
                t >= start && t < end
            })
            .collect();
        selected.sort_by_key(|it| it.timestamp);
        selected.into_iter().flat_map(|it| self.headline_tokens(&it.headline)).collect()
    }

    /// Aggregate many days at once; `days` must be sorted ascending.
    pub fn aggregate_days(&self, items: &[RawNewsItem], filter: &TagFilter, days: &[NaiveDate]) -> Vec<Vec<String>> {
        let mut by_day: std::collections::HashMap<NaiveDate, Vec<&RawNewsItem>> = Default::default();
        for it in items.iter().filter(|it| filter.matches(it)) {
            by_day.entry(self.window.day_of(it.timestamp)).or_default().push(it);
        }
        days.iter()
            .map(|d| {
                let mut v = by_day.remove(d).unwrap_or_default();
                v.sort_by_key(|it| it.timestamp);
                v.into_iter().flat_map(|it| self.headline_tokens(&it.headline)).collect()
            })
            .collect()
    }
}

/// Headline tokens of items tagged `ticker_tag` published in
/// `[day cutoff, day+1 cutoff)` US/Eastern, in timestamp order. Bodies are ignored.
pub fn aggregate_daily_headlines(
    items: &[RawNewsItem],
    ticker_tag: &str,
    day: NaiveDate,
    cutoff: NaiveTime,
) -> Vec<String> {
    let proc = HeadlineProcessor {
        window: DayWindow { cutoff, ..DayWindow::default() },
        ..HeadlineProcessor::default()
    };
    proc.aggregate(items, &TagFilter::tag(ticker_tag), day)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, ts: &str, headline: &str, tags: &[&str]) -> RawNewsItem {
        RawNewsItem {
            id: id.into(),
            timestamp: DateTime::parse_from_rfc3339(ts).unwrap(),
            headline: headline.into(),
            body: "body text".into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn nine_thirty() -> NaiveTime {
        NaiveTime::from_hms_opt(9, 30, 0).unwrap()
    }

    #[test]
    fn concatenates_same_day_headlines() {
        let items = vec![
            item("1", "2016-10-26T10:00:00-04:00", "apple shares jump after earnings", &["about:aapl"]),
            item("2", "2016-10-26T15:00:00-04:00", "apple cuts iphone orders sharply", &["about:aapl"]),
        ];
        let toks = aggregate_daily_headlines(&items, "about:aapl", d("2016-10-26"), nine_thirty());
        assert_eq!(toks.len(), 10);
        assert_eq!(toks[0], "apple");
        assert_eq!(toks[5], "apple");
    }

    #[test]
    fn pre_cutoff_goes_to_previous_day() {
        let items = vec![item("1", "2016-10-26T09:29:00-04:00", "apple shares jump after earnings", &["about:aapl"])];
        assert!(aggregate_daily_headlines(&items, "about:aapl", d("2016-10-26"), nine_thirty()).is_empty());
        assert_eq!(aggregate_daily_headlines(&items, "about:aapl", d("2016-10-25"), nine_thirty()).len(), 5);
        let w = DayWindow::default();
        assert_eq!(w.day_of(items[0].timestamp), d("2016-10-25"));
        // same instant expressed in UTC
        let utc = item("2", "2016-10-26T13:29:00+00:00", "x", &[]);
        assert_eq!(w.day_of(utc.timestamp), d("2016-10-25"));
    }

    #[test]
    fn no_matching_tag() {
        let items = vec![item("1", "2016-10-26T10:00:00-04:00", "apple shares jump after earnings", &["about:msft"])];
        assert!(aggregate_daily_headlines(&items, "about:aapl", d("2016-10-26"), nine_thirty()).is_empty());
    }

    #[test]
    fn window_respects_dst() {
        // winter: 09:30 EST == 14:30 UTC
        let w = DayWindow::default();
        let (s, e) = w.bounds(d("2016-01-05"));
        assert_eq!(s.to_rfc3339(), "2016-01-05T14:30:00+00:00");
        assert_eq!(e.to_rfc3339(), "2016-01-06T14:30:00+00:00");
        let (s, _) = w.bounds(d("2016-07-05"));
        assert_eq!(s.to_rfc3339(), "2016-07-05T13:30:00+00:00");
    }

    #[test]
    fn aggregate_days_matches_single_day() {
        let items = vec![
            item("1", "2016-10-25T11:00:00-04:00", "intel beats quarterly revenue forecast", &["about:intc"]),
            item("2", "2016-10-26T08:00:00-04:00", "intel chief executive steps down today", &["about:intc"]),
            item("3", "2016-10-26T12:00:00-04:00", "intel launches new chip for servers", &["about:intc"]),
        ];
        let p = HeadlineProcessor::default();
        let f = TagFilter::about("INTC");
        let days = [d("2016-10-25"), d("2016-10-26"), d("2016-10-27")];
        let bulk = p.aggregate_days(&items, &f, &days);
        for (i, day) in days.iter().enumerate() {
            assert_eq!(bulk[i], p.aggregate(&items, &f, *day));
        }
        assert_eq!(bulk[0].len(), 11);
    }

    #[test]
    fn hot_politics_filter() {
        let a = item("1", "2016-10-26T10:00:00-04:00", "h", &["hot", "subject:politics"]);
        let b = item("2", "2016-10-26T10:00:00-04:00", "h", &["hot"]);
        assert!(TagFilter::hot_politics().matches(&a));
        assert!(!TagFilter::hot_politics().matches(&b));
    }

    #[test]
    fn jsonl_round_trip_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("news.jsonl");
        let items = vec![
            item("2", "2016-10-26T12:00:00-04:00", "b headline", &["about:aapl"]),
            item("1", "2016-10-26T10:00:00-04:00", "a headline", &["about:aapl"]),
            item("3", "2016-10-26T10:00:00-04:00", "a headline", &["about:aapl"]),
        ];
        write_news_jsonl(&p, &items).unwrap();
        let back = read_news_jsonl(&p).unwrap();
        assert_eq!(back, items);
        let dd = dedup_and_sort(back);
        assert_eq!(dd.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(), vec!["1", "2"]);
    }
}
