use chrono::NaiveDate;

use crate::nlpml::{multi_day_input, LookupTable, SentenceMatrix};
use crate::textprep::{HeadlineProcessor, RawNewsItem, SentenceCorpus, TagFilter};

/// One sentence per headline, for embedding training.
pub fn headline_corpus(news: &[RawNewsItem], proc: &HeadlineProcessor) -> SentenceCorpus {
    SentenceCorpus::new(news.iter().map(|n| proc.headline_tokens(&n.headline)).collect())
}

/// Headline tokens of `ticker` per trading day.
pub fn daily_tokens(news: &[RawNewsItem], ticker: &str, dates: &[NaiveDate], proc: &HeadlineProcessor) -> Vec<Vec<String>> {
    proc.aggregate_days(news, &TagFilter::about(ticker), dates)
}

/// Network input for every day: `inputs[t]` covers the news windows of the
/// last `input_days` days up to and including `t`.
pub fn daily_inputs(days: &[Vec<String>], table: &LookupTable, input_days: usize, max_len: usize) -> Vec<SentenceMatrix> {
    (0..days.len()).map(|t| multi_day_input(&days[..=t], input_days, table, max_len)).collect()
}
