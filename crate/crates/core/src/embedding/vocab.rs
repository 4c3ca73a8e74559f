use std::collections::HashMap;

use crate::textprep::SentenceCorpus;

use super::subword::{SubwordConfig, SubwordIndex};
use super::{Algorithm, EmbedError, TrainConfig};

/// Token <-> index map, sorted by descending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_tokens: u64,
    subwords: Option<SubwordIndex>,
}

impl Vocabulary {
    /// Assemble from already ordered tokens and counts.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>, subwords: Option<SubwordConfig>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let total_tokens = counts.iter().sum();
        let subwords = subwords.map(|cfg| SubwordIndex::build(tokens.iter().map(String::as_str), cfg));
        Self { tokens, counts, index, total_tokens, subwords }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Sum of retained token counts.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn subwords(&self) -> Option<&SubwordIndex> {
        self.subwords.as_ref()
    }

    pub fn subword_config(&self) -> Option<SubwordConfig> {
        self.subwords.as_ref().map(|s| s.config)
    }
}

/// Count tokens, drop those below `min_count`, order by descending
/// frequency with ties broken by first occurrence, cap at `max_vocab`.
pub fn build_vocab(corpus: &SentenceCorpus, cfg: &TrainConfig) -> Result<Vocabulary, EmbedError> {
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in corpus.sentences.iter().flatten() {
        let next = first_seen.len();
        first_seen.entry(t.as_str()).or_insert(next);
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| first_seen[a.0].cmp(&first_seen[b.0])));
    if let Some(max) = cfg.max_vocab {
        entries.truncate(max);
    }
    if entries.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    let subwords = match cfg.algorithm {
        Algorithm::FastText => Some(cfg.subwords),
        Algorithm::Word2Vec => None,
    };
    Ok(Vocabulary::from_parts(
        entries.iter().map(|(t, _)| t.to_string()).collect(),
        entries.iter().map(|&(_, c)| c).collect(),
        subwords,
    ))
}
