use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;

pub const PAD_TOKEN: &str = "NONE";
pub const OOV_TOKEN: &str = "<oov>";
pub const PAD_ROW: u32 = 0;
pub const OOV_ROW: u32 = 1;

/// Token vectors as seen by the network. Row 0 is the padding token and
/// row 1 the Word2Vec out-of-vocabulary token; both stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    pub dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    pub data: Vec<f64>,
}

impl LookupTable {
    pub fn new(dim: usize) -> Self {
        let mut t = Self { dim, tokens: Vec::new(), index: HashMap::new(), data: Vec::new() };
        t.push(PAD_TOKEN, &vec![0.0; dim]);
        t.push(OOV_TOKEN, &vec![0.0; dim]);
        t
    }

    /// Table covering `tokens`: vocabulary entries take their embedding
    /// vector, FastText resolves unseen tokens through subwords, anything
    /// else falls back to the zero OOV row.
    pub fn from_embedding<'a>(emb: &Embedding, tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut t = Self::new(emb.dim());
        for tok in tokens {
            if t.index.contains_key(tok) {
                continue;
            }
            if let Ok(v) = emb.vector(tok) {
                t.push(tok, &v);
            }
        }
        t
    }

    /// Rebuilds from stored parts (used when loading checkpoints).
    pub fn from_parts(dim: usize, tokens: Vec<String>, data: Vec<f64>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { dim, tokens, index, data }
    }

    pub fn push(&mut self, token: &str, v: &[f64]) -> u32 {
        assert_eq!(v.len(), self.dim);
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        self.data.extend_from_slice(v);
        id
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

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    /// Row of `token`; unknown tokens map to the OOV row.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(OOV_ROW)
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// One day's network input: token rows padded to `max_len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceMatrix {
    /// Length `max_len`; real tokens first, then `PAD_ROW`.
    pub token_ids: Vec<u32>,
    pub n_real: usize,
    /// Day without any headline: row 0 is the trainable no-news vector.
    pub no_news: bool,
}

impl SentenceMatrix {
    pub fn max_len(&self) -> usize {
        self.token_ids.len()
    }

    /// `true` at padding positions.
    pub fn pad_mask(&self) -> Vec<bool> {
        (0..self.token_ids.len()).map(|i| i >= self.n_real).collect()
    }

    /// Number of leading rows the network has to look at (real tokens, or
    /// the single no-news row).
    pub fn active_rows(&self) -> usize {
        if self.no_news {
            1
        } else {
            self.n_real
        }
    }

    /// Real-token rows as a dense `active_rows × dim` matrix, with
    /// `no_news` supplying the row for empty days.
    pub fn resolve(&self, table: &LookupTable, no_news: &[f64]) -> Vec<f64> {
        if self.no_news {
            return no_news.to_vec();
        }
        let mut out = Vec::with_capacity(self.n_real * table.dim);
        for &id in &self.token_ids[..self.n_real] {
            out.extend_from_slice(table.row(id));
        }
        out
    }
}

/// Looks up the first `max_len` tokens and pads the rest.
pub fn build_day_input(tokens: &[String], table: &LookupTable, max_len: usize) -> SentenceMatrix {
    let n_real = tokens.len().min(max_len);
    let mut token_ids: Vec<u32> = tokens[..n_real].iter().map(|t| table.id(t)).collect();
    token_ids.resize(max_len, PAD_ROW);
    SentenceMatrix { token_ids, n_real, no_news: n_real == 0 }
}

/// Input built from the last `n_days` days (chronological order, oldest
/// first). Each day keeps its first `max_len` tokens; if the concatenation
/// is still longer than `max_len`, tokens are dropped from the oldest end.
pub fn multi_day_input(days: &[Vec<String>], n_days: usize, table: &LookupTable, max_len: usize) -> SentenceMatrix {
    let start = days.len().saturating_sub(n_days.max(1));
    let mut all: Vec<String> = Vec::new();
    for d in &days[start..] {
        all.extend(d.iter().take(max_len).cloned());
    }
    let skip = all.len().saturating_sub(max_len);
    build_day_input(&all[skip..], table, max_len)
}
