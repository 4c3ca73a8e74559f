use super::subword::{bucket_ids, SubwordIndex};
use super::{EmbedError, EmbeddingMatrix, Vocabulary};

/// A trained embedding: vocabulary plus vector tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vocab: Vocabulary,
    pub matrix: EmbeddingMatrix,
}

/// Sum of a token's subword rows plus, for in-vocabulary tokens, the
/// token's own row. Out-of-vocabulary tokens resolve through n-grams alone.
pub fn fasttext_vector(
    token: &str,
    vocab: &Vocabulary,
    idx: &SubwordIndex,
    mats: &EmbeddingMatrix,
) -> Result<Vec<f64>, EmbedError> {
    let wrapped_len = token.chars().count() + 2;
    if wrapped_len < idx.config.ngram_min {
        return Err(EmbedError::NoSubwords(token.to_string()));
    }
    let n = vocab.len();
    let mut out = vec![0.0; mats.dim];
    let add = |out: &mut [f64], row: &[f32]| out.iter_mut().zip(row).for_each(|(o, &v)| *o += v as f64);
    let grams = match vocab.index_of(token) {
        Some(i) => {
            add(&mut out, mats.input_row(i));
            idx.per_token[i].clone()
        }
        None => bucket_ids(token, &idx.config),
    };
    if grams.is_empty() && vocab.index_of(token).is_none() {
        return Err(EmbedError::NoSubwords(token.to_string()));
    }
    for g in grams {
        add(&mut out, mats.input_row(n + g as usize));
    }
    Ok(out)
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn is_fasttext(&self) -> bool {
        self.vocab.subwords().is_some()
    }

    /// Input rows that compose the vector of vocabulary entry `i`.
    pub fn rows_of(&self, i: usize) -> Vec<usize> {
        let mut rows = vec![i];
        if let Some(sw) = self.vocab.subwords() {
            let n = self.vocab.len();
            rows.extend(sw.per_token[i].iter().map(|&g| n + g as usize));
        }
        rows
    }

    /// Vector of an in-vocabulary entry.
    pub fn vector_at(&self, i: usize) -> Vec<f64> {
        match self.vocab.subwords() {
            Some(sw) => fasttext_vector(self.vocab.token(i), &self.vocab, sw, &self.matrix)
                .expect("in-vocabulary tokens always resolve"),
            None => self.matrix.input_row(i).iter().map(|&v| v as f64).collect(),
        }
    }

    /// Vector of any token: vocabulary lookup, falling back to subwords for
    /// FastText models.
    pub fn vector(&self, token: &str) -> Result<Vec<f64>, EmbedError> {
        if let Some(sw) = self.vocab.subwords() {
            return fasttext_vector(token, &self.vocab, sw, &self.matrix);
        }
        self.vocab
            .index_of(token)
            .map(|i| self.vector_at(i))
            .ok_or_else(|| EmbedError::TokenNotFound(token.to_string()))
    }

    /// Unit-normalised vectors of every vocabulary entry, row-major.
    /// Zero vectors stay zero.
    pub fn unit_vectors(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(self.vocab.len() * dim);
        for i in 0..self.vocab.len() {
            let v = self.vector_at(i);
            out.extend(normalized(&v));
        }
        out
    }
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
