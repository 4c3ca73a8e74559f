//! Bigram phrase detection with the word2vec phrase score
//! `(count(ab) - min_count) * total / (count(a) * count(b))`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SentenceCorpus;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhraseConfig {
    pub min_count: u64,
    pub threshold: f64,
    /// Size of the count table used for scoring; entries beyond the most
    /// frequent `max_vocab` unigrams/bigrams count as unseen.
    pub max_vocab: usize,
    /// Number of detection passes (1 = bigrams only, 2 allows trigrams ...).
    pub passes: usize,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            threshold: 10.0,
            max_vocab: 30_000_000,
            passes: 1,
        }
    }
}

/// Learned phrase pairs, one set per pass, reusable on unseen text.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct PhraseModel {
    pub passes: Vec<Vec<(String, String)>>,
}

impl PhraseModel {
    pub fn apply(&self, sentence: &[String]) -> Vec<String> {
        let mut cur = sentence.to_vec();
        for pass in &self.passes {
            let set: HashSet<(&str, &str)> = pass.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            cur = merge_sentence(&cur, |a, b| set.contains(&(a, b))).0;
        }
        cur
    }

    pub fn is_empty(&self) -> bool {
        self.passes.iter().all(Vec::is_empty)
    }
}

/// Greedy left-to-right merge; returns the new sentence and the merge count.
fn merge_sentence(sentence: &[String], qualifies: impl Fn(&str, &str) -> bool) -> (Vec<String>, usize) {
    let mut out = Vec::with_capacity(sentence.len());
    let mut merges = 0;
    let mut i = 0;
    while i < sentence.len() {
        if i + 1 < sentence.len() && qualifies(&sentence[i], &sentence[i + 1]) {
            out.push(format!("{}_{}", sentence[i], sentence[i + 1]));
            merges += 1;
            i += 2;
        } else {
            out.push(sentence[i].clone());
            i += 1;
        }
    }
    (out, merges)
}

pub fn phrase_score(pair_count: u64, count_a: u64, count_b: u64, min_count: u64, total: u64) -> f64 {
    if count_a == 0 || count_b == 0 {
        return f64::NEG_INFINITY;
    }
    (pair_count as f64 - min_count as f64) * total as f64 / (count_a as f64 * count_b as f64)
}

/// Outcome of one or more detection passes.
#[derive(Debug, Clone)]
pub struct PhraseOutcome {
    pub corpus: SentenceCorpus,
    pub model: PhraseModel,
    pub merges: usize,
}

fn single_pass(corpus: &SentenceCorpus, cfg: &PhraseConfig) -> (SentenceCorpus, Vec<(String, String)>, usize) {
    let mut unigrams: HashMap<&str, u64> = HashMap::new();
    let mut bigrams: HashMap<(&str, &str), u64> = HashMap::new();
    let mut total = 0u64;
    for s in &corpus.sentences {
        for (i, t) in s.iter().enumerate() {
            *unigrams.entry(t.as_str()).or_default() += 1;
            total += 1;
            if i + 1 < s.len() {
                *bigrams.entry((t.as_str(), s[i + 1].as_str())).or_default() += 1;
            }
        }
    }

    // prune the joint count table to the most frequent `max_vocab` entries
    if unigrams.len() + bigrams.len() > cfg.max_vocab {
        let mut all: Vec<(u64, String, bool)> = unigrams
            .iter()
            .map(|(k, &c)| (c, k.to_string(), false))
            .chain(bigrams.iter().map(|((a, b), &c)| (c, format!("{a} {b}"), true)))
            .collect();
        all.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
        let keep: HashSet<(String, bool)> = all.into_iter().take(cfg.max_vocab).map(|(_, k, b)| (k, b)).collect();
        unigrams.retain(|k, _| keep.contains(&(k.to_string(), false)));
        bigrams.retain(|(a, b), _| keep.contains(&(format!("{a} {b}"), true)));
    }

    let mut accepted: BTreeMap<(String, String), ()> = BTreeMap::new();
    for (&(a, b), &c) in &bigrams {
        let ca = unigrams.get(a).copied().unwrap_or(0);
        let cb = unigrams.get(b).copied().unwrap_or(0);
        if phrase_score(c, ca, cb, cfg.min_count, total) > cfg.threshold {
            accepted.insert((a.to_string(), b.to_string()), ());
        }
    }

    let mut merges = 0;
    let sentences: Vec<Vec<String>> = corpus
        .sentences
        .iter()
        .map(|s| {
            let (out, m) = merge_sentence(s, |a, b| accepted.contains_key(&(a.to_string(), b.to_string())));
            merges += m;
            out
        })
        .collect();
    (SentenceCorpus::new(sentences), accepted.into_keys().collect(), merges)
}

/// Learn and apply phrase merges for `cfg.passes` passes.
pub fn learn_phrases(corpus: &SentenceCorpus, cfg: &PhraseConfig) -> PhraseOutcome {
    let mut cur = corpus.clone();
    let mut model = PhraseModel::default();
    let mut merges = 0;
    for _ in 0..cfg.passes.max(1) {
        let (next, pairs, m) = single_pass(&cur, cfg);
        merges += m;
        model.passes.push(pairs);
        cur = next;
        if m == 0 {
            break;
        }
    }
    PhraseOutcome { corpus: cur, model, merges }
}

/// Single-pass bigram detection and merge.
pub fn detect_bigrams(corpus: &SentenceCorpus, min_count: u64, threshold: f64, max_vocab: usize) -> SentenceCorpus {
    let cfg = PhraseConfig { min_count, threshold, max_vocab, passes: 1 };
    single_pass(corpus, &cfg).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(sents: Vec<Vec<&str>>) -> SentenceCorpus {
        SentenceCorpus::new(sents.into_iter().map(|s| s.into_iter().map(String::from).collect()).collect())
    }

    /// 100 x "new york", 10 extra "new", 9790 filler tokens: total 10000.
    fn new_york_corpus() -> SentenceCorpus {
        let mut sents = Vec::new();
        for _ in 0..100 {
            sents.push(vec!["new", "york"]);
        }
        for _ in 0..10 {
            sents.push(vec!["new"]);
        }
        let fillers = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa"];
        let mut sent = Vec::new();
        for i in 0..9790 {
            sent.push(fillers[i % fillers.len()]);
            if sent.len() == 1 {
                sents.push(std::mem::take(&mut sent));
            }
        }
        corpus(sents)
    }

    #[test]
    fn hand_evaluated_score() {
        // (100 - 5) * 10000 / (110 * 100)
        let s = phrase_score(100, 110, 100, 5, 10_000);
        assert!((s - 86.363_636_363_636_36).abs() < 1e-9);
        let c = new_york_corpus();
        assert_eq!(c.total_tokens(), 10_000);
        let merged = detect_bigrams(&c, 5, 10.0, 30_000_000);
        assert_eq!(merged.token_counts.get("new_york"), Some(&100));
        assert_eq!(merged.token_counts.get("new"), Some(&10));
        assert_eq!(merged.token_counts.get("york"), None);
    }

    #[test]
    fn pair_at_min_count_never_merges() {
        assert!(phrase_score(5, 5, 5, 5, 100) <= 0.0);
        let c = corpus(vec![vec!["a", "b"]; 5]);
        let merged = detect_bigrams(&c, 5, 0.0, 1000);
        assert_eq!(merged, c);
    }

    #[test]
    fn infinite_threshold_is_identity() {
        let c = new_york_corpus();
        assert_eq!(detect_bigrams(&c, 5, f64::INFINITY, 1000), c);
    }

    #[test]
    fn multi_pass_builds_trigrams() {
        let c = corpus(vec![vec!["new", "york", "city", "x"]; 50]
            .into_iter()
            .chain(vec![vec!["a", "b"]; 200].into_iter().map(|_| vec!["q"]))
            .collect());
        let cfg = PhraseConfig { min_count: 1, threshold: 1.0, max_vocab: 1000, passes: 2 };
        let out = learn_phrases(&c, &cfg);
        assert!(out.corpus.token_counts.contains_key("new_york_city_x")
            || out.corpus.token_counts.contains_key("new_york_city"));
        let applied = out.model.apply(&["new", "york", "city", "x"].map(String::from));
        assert_eq!(applied.len(), out.corpus.sentences[0].len());
    }

    #[test]
    fn pruned_pairs_are_not_merged() {
        let c = new_york_corpus();
        // table of size 1 keeps only the most frequent filler unigram
        let merged = detect_bigrams(&c, 5, 10.0, 1);
        assert_eq!(merged, c);
    }

    fn small_corpus() -> impl Strategy<Value = SentenceCorpus> {
        prop::collection::vec(prop::collection::vec(0u8..5, 1..8), 1..40).prop_map(|ss| {
            SentenceCorpus::new(
                ss.into_iter()
                    .map(|s| s.into_iter().map(|t| format!("t{t}")).collect())
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn token_conservation(c in small_corpus(), thr in 0.0f64..5.0) {
            let cfg = PhraseConfig { min_count: 1, threshold: thr, max_vocab: 1000, passes: 1 };
            let out = learn_phrases(&c, &cfg);
            prop_assert_eq!(out.corpus.total_tokens(), c.total_tokens() - out.merges as u64);
        }

        #[test]
        fn threshold_monotonicity(c in small_corpus(), lo in 0.0f64..3.0, extra in 0.0f64..3.0) {
            let m = |t: f64| learn_phrases(&c, &PhraseConfig { min_count: 1, threshold: t, max_vocab: 1000, passes: 1 }).merges;
            prop_assert!(m(lo + extra) <= m(lo));
        }

        #[test]
        fn deterministic(c in small_corpus()) {
            let a = detect_bigrams(&c, 1, 0.5, 1000);
            let b = detect_bigrams(&c, 1, 0.5, 1000);
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
