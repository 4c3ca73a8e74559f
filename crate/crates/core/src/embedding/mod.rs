//! Word2Vec and FastText embeddings trained with negative sampling, plus the
//! intrinsic evaluation tools (analogies, similarity, neighbours,
//! odd-one-out, PCA).

mod eval;
mod io;
mod matrix;
mod model;
mod sampler;
pub mod sgns;
mod subword;
mod train;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{
    analogy, evaluate_analogy_suite, evaluate_similarity, most_similar, odd_one_out, parse_analogy_file,
    parse_similarity_file, pca_project, softmax_probabilities, AnalogyQuestion, AnalogyReport, SectionScore,
    SimilarityPair, SimilarityReport,
};
pub use io::{load_embedding, save_embedding, EmbeddingFormat};
pub use matrix::{EmbeddingMatrix, RowStore, SharedMatrix, SharedView};
pub use model::{cosine, fasttext_vector, normalized, Embedding};
pub use sampler::{negative_sample, NegativeSampler};
pub use sgns::{cbow_step, sgns_pair_step};
pub use subword::{bucket_ids, char_ngrams, fnv1a, SubwordConfig, SubwordIndex};
pub use train::{initial_matrix, train, train_with_vocab};
pub use vocab::{build_vocab, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no token survives the vocabulary filter")]
    EmptyVocabulary,
    #[error("token not in vocabulary: {0}")]
    TokenNotFound(String),
    #[error("token too short for subword n-grams: {0:?}")]
    NoSubwords(String),
    #[error("malformed benchmark line {line}: {msg}")]
    MalformedBenchmark { line: usize, msg: String },
    #[error("only {0} resolvable pairs, need at least 2")]
    TooFewPairs(usize),
    #[error("need at least {need} tokens, got {got}")]
    TooFewTokens { need: usize, got: usize },
    #[error("embedding file: {0}")]
    FormatError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(alias = "sg")]
    SkipGram,
    Cbow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Word2Vec,
    FastText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub ns_exponent: f64,
    pub dim: usize,
    pub subwords: SubwordConfig,
    pub max_vocab: Option<usize>,
    /// Frequent-token subsampling threshold; `None` disables it.
    pub sample: Option<f64>,
    pub seed: u64,
    /// 1 selects the strict single-worker mode.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SkipGram,
            algorithm: Algorithm::Word2Vec,
            window: 5,
            min_count: 5,
            negatives: 5,
            epochs: 5,
            alpha0: 0.025,
            alpha_min: 0.0001,
            ns_exponent: 0.75,
            dim: 300,
            subwords: SubwordConfig::default(),
            max_vocab: None,
            sample: None,
            seed: 1,
            threads: 1,
        }
    }
}
