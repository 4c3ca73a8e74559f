//! Character n-gram subwords with hashed buckets.

use serde::{Deserialize, Serialize};

pub const BOW: char = '<';
pub const EOW: char = '>';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub buckets: usize,
}

impl Default for SubwordConfig {
    fn default() -> Self {
        Self { ngram_min: 3, ngram_max: 6, buckets: 1 << 21 }
    }
}

/// Character n-grams of `<token>` with lengths in `[min_n, max_n]`,
/// excluding the whole bracketed token (that one is the token's own row).
pub fn char_ngrams(token: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once(BOW).chain(token.chars()).chain(std::iter::once(EOW)).collect();
    let mut out = Vec::new();
    for start in 0..wrapped.len() {
        for n in min_n..=max_n {
            let end = start + n;
            if end > wrapped.len() {
                break;
            }
            if start == 0 && end == wrapped.len() {
                continue;
            }
            out.push(wrapped[start..end].iter().collect());
        }
    }
    out
}

/// 32-bit FNV-1a, the hash used by fastText for n-gram buckets.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for b in s.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

/// Per-token bucket ids of every n-gram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordIndex {
    pub config: SubwordConfig,
    pub per_token: Vec<Vec<u32>>,
}

impl SubwordIndex {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, config: SubwordConfig) -> Self {
        let per_token = tokens.into_iter().map(|t| bucket_ids(t, &config)).collect();
        Self { config, per_token }
    }
}

pub fn bucket_ids(token: &str, cfg: &SubwordConfig) -> Vec<u32> {
    if cfg.buckets == 0 {
        return Vec::new();
    }
    char_ngrams(token, cfg.ngram_min, cfg.ngram_max)
        .iter()
        .map(|g| fnv1a(g) % cfg.buckets as u32)
        .collect()
}
