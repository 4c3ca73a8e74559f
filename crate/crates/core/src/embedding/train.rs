use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::textprep::SentenceCorpus;

use super::matrix::{RowStore, SharedMatrix};
use super::sampler::NegativeSampler;
use super::sgns::{ns_step, Scratch};
use super::{build_vocab, Algorithm, EmbedError, Embedding, EmbeddingMatrix, Mode, TrainConfig, Vocabulary};

/// Corpus mapped to vocabulary indices; out-of-vocabulary tokens dropped.
fn index_corpus(corpus: &SentenceCorpus, vocab: &Vocabulary) -> Vec<Vec<usize>> {
    corpus
        .sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index_of(t)).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect()
}

/// word2vec keep-probability for frequent-token subsampling.
fn keep_probabilities(vocab: &Vocabulary, sample: f64) -> Vec<f64> {
    let total = vocab.total_tokens() as f64;
    vocab
        .counts()
        .iter()
        .map(|&c| {
            let f = c as f64;
            (((f / (sample * total)).sqrt() + 1.0) * (sample * total) / f).min(1.0)
        })
        .collect()
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    vocab: &'a Vocabulary,
    sampler: NegativeSampler,
    keep: Option<Vec<f64>>,
    total_updates: f64,
}

impl Trainer<'_> {
    fn alpha(&self, processed: u64) -> f64 {
        let progress = (processed as f64 / self.total_updates).min(1.0);
        let a = self.cfg.alpha0 - (self.cfg.alpha0 - self.cfg.alpha_min) * progress;
        a.max(self.cfg.alpha_min)
    }

    fn input_rows(&self, token: usize, out: &mut Vec<usize>) {
        out.push(token);
        if let Some(sw) = self.vocab.subwords() {
            let n = self.vocab.len();
            out.extend(sw.per_token[token].iter().map(|&g| n + g as usize));
        }
    }

    /// Trains on one sentence; `processed` counts positions seen so far
    /// (before subsampling) and drives the learning-rate schedule.
    fn sentence<S: RowStore, R: Rng>(
        &self,
        store: &mut S,
        rng: &mut R,
        sentence: &[usize],
        processed: &dyn Fn(u64) -> u64,
        buf: &mut Buffers,
    ) {
        let alpha = self.alpha(processed(sentence.len() as u64));
        let words: &[usize] = match &self.keep {
            Some(keep) => {
                buf.kept.clear();
                buf.kept.extend(sentence.iter().copied().filter(|&w| rng.gen::<f64>() < keep[w]));
                &buf.kept
            }
            None => sentence,
        };
        let k = self.cfg.window.max(1);
        for pos in 0..words.len() {
            let radius = rng.gen_range(1..=k);
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(words.len() - 1);
            let center = words[pos];
            match self.cfg.mode {
                Mode::SkipGram => {
                    buf.rows.clear();
                    self.input_rows(center, &mut buf.rows);
                    let update_scale = 1.0 / buf.rows.len() as f64;
                    for (c, &ctx) in words.iter().enumerate().take(hi + 1).skip(lo) {
                        if c == pos {
                            continue;
                        }
                        self.sampler.sample_into(rng, self.cfg.negatives, ctx, &mut buf.negs);
                        ns_step(store, &buf.rows, 1.0, update_scale, ctx, &buf.negs, alpha, &mut buf.scratch);
                    }
                }
                Mode::Cbow => {
                    buf.rows.clear();
                    let mut n_ctx = 0;
                    for (c, &ctx) in words.iter().enumerate().take(hi + 1).skip(lo) {
                        if c != pos {
                            self.input_rows(ctx, &mut buf.rows);
                            n_ctx += 1;
                        }
                    }
                    if n_ctx == 0 {
                        continue;
                    }
                    let per_token_rows = buf.rows.len() as f64 / n_ctx as f64;
                    self.sampler.sample_into(rng, self.cfg.negatives, center, &mut buf.negs);
                    ns_step(
                        store,
                        &buf.rows,
                        1.0 / n_ctx as f64,
                        1.0 / per_token_rows,
                        center,
                        &buf.negs,
                        alpha,
                        &mut buf.scratch,
                    );
                }
            }
        }
    }
}

#[derive(Default)]
struct Buffers {
    rows: Vec<usize>,
    negs: Vec<usize>,
    kept: Vec<usize>,
    scratch: Scratch,
}

/// Initial matrices for `vocab`, as used by [`train`].
pub fn initial_matrix(vocab: &Vocabulary, cfg: &TrainConfig) -> EmbeddingMatrix {
    let buckets = match cfg.algorithm {
        Algorithm::FastText => cfg.subwords.buckets,
        Algorithm::Word2Vec => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    EmbeddingMatrix::init(vocab.len() + buckets, vocab.len(), cfg.dim, &mut rng)
}

/// Train from an existing vocabulary.
pub fn train_with_vocab(corpus: &SentenceCorpus, vocab: Vocabulary, cfg: &TrainConfig) -> Embedding {
    let mut matrix = initial_matrix(&vocab, cfg);
    let sentences = index_corpus(corpus, &vocab);
    let positions: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let trainer = Trainer {
        cfg,
        vocab: &vocab,
        sampler: NegativeSampler::new(vocab.counts(), cfg.ns_exponent),
        keep: cfg.sample.map(|s| keep_probabilities(&vocab, s)),
        total_updates: (positions * cfg.epochs as u64).max(1) as f64,
    };

    if cfg.threads <= 1 {
        // strict: one worker, fixed order, bit-reproducible
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut buf = Buffers::default();
        let mut processed = 0u64;
        for _ in 0..cfg.epochs {
            for s in &sentences {
                let before = processed;
                trainer.sentence(&mut matrix, &mut rng, s, &|_| before, &mut buf);
                processed += s.len() as u64;
            }
        }
    } else {
        let shared = SharedMatrix::from_matrix(&matrix);
        let counter = AtomicU64::new(0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().expect("thread pool");
        let chunk = sentences.len().div_ceil(cfg.threads).max(1);
        pool.install(|| {
            sentences.par_chunks(chunk).enumerate().for_each(|(worker, part)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(worker as u64 + 1));
                let mut view = shared.view();
                let mut buf = Buffers::default();
                let fetch = |n: u64| counter.fetch_add(n, Ordering::Relaxed);
                for _ in 0..cfg.epochs {
                    for s in part {
                        trainer.sentence(&mut view, &mut rng, s, &fetch, &mut buf);
                    }
                }
            });
        });
        matrix = shared.into_matrix();
    }
    Embedding { vocab, matrix }
}

/// Build the vocabulary and train Skip-gram/CBOW (Word2Vec or FastText)
/// with negative sampling.
pub fn train(corpus: &SentenceCorpus, cfg: &TrainConfig) -> Result<Embedding, EmbedError> {
    let vocab = build_vocab(corpus, cfg)?;
    Ok(train_with_vocab(corpus, vocab, cfg))
}
