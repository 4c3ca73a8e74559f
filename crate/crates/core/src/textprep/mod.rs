//! News text preparation: rule-based cleaning, tokenization, bigram phrase
//! merging and daily headline aggregation.

mod news;
mod phrases;
mod rules;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use news::{
    aggregate_daily_headlines, dedup_and_sort, read_news_jsonl, write_news_jsonl, DayWindow, HeadlineProcessor,
    RawNewsItem, TagFilter,
};
pub use phrases::{detect_bigrams, learn_phrases, phrase_score, PhraseConfig, PhraseModel, PhraseOutcome};
pub use rules::{clean_text, CleanRule, RuleAction, RuleCategory, RuleSet, DEFAULT_CATALOGUE, MIN_CLEAN_CHARS};
pub use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cleaned text too short ({len} characters)")]
    TooShort { len: usize },
    #[error("nothing left after cleaning")]
    EmptyAfterClean,
    #[error("rule catalogue line {line}: {msg}")]
    Catalogue { line: usize, msg: String },
    #[error("news record line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tokenized sentences plus token frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceCorpus {
    pub sentences: Vec<Vec<String>>,
    pub token_counts: BTreeMap<String, u64>,
}

impl SentenceCorpus {
    /// Builds a corpus, dropping empty sentences and recomputing counts.
    pub fn new(sentences: Vec<Vec<String>>) -> Self {
        let sentences: Vec<Vec<String>> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let mut token_counts = BTreeMap::new();
        for t in sentences.iter().flatten() {
            *token_counts.entry(t.clone()).or_insert(0) += 1;
        }
        Self { sentences, token_counts }
    }

    pub fn total_tokens(&self) -> u64 {
        self.token_counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Clean and tokenize raw texts; texts rejected by the cleaner are skipped.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, rules: &RuleSet) -> Self {
        let sentences = texts
            .into_iter()
            .filter_map(|t| clean_text(t, rules).ok())
            .flat_map(|c| tokenize(&c))
            .collect();
        Self::new(sentences)
    }

    pub fn write_lines(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.join(" "));
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    /// One sentence per line, tokens separated by single spaces.
    pub fn read_lines(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            text.lines().map(|l| l.split_whitespace().map(str::to_string).collect()).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_counts_consistent() {
        let c = SentenceCorpus::new(vec![
            vec!["a".into(), "b".into()],
            vec![],
            vec!["a".into()],
        ]);
        assert_eq!(c.sentences.len(), 2);
        assert_eq!(c.token_counts["a"], 2);
        assert_eq!(c.total_tokens(), 3);
    }

    #[test]
    fn corpus_from_texts_is_deterministic() {
        let texts = [
            "Apple shares rose sharply. Analysts cheered the results!",
            "short",
            "Microsoft cut its forecast for cloud revenue growth.",
        ];
        let a = SentenceCorpus::from_texts(texts, &RuleSet::default());
        let b = SentenceCorpus::from_texts(texts, &RuleSet::default());
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert_eq!(a.sentences.len(), 3);
        assert!(a.token_counts.keys().all(|k| k == &k.to_lowercase()));
    }

    #[test]
    fn lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        let c = SentenceCorpus::new(vec![vec!["x".into(), "y_z".into()], vec!["$4.2m".into()]]);
        c.write_lines(&p).unwrap();
        assert_eq!(SentenceCorpus::read_lines(&p).unwrap(), c);
    }
}
