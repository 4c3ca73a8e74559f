use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::stats::spearman;

use super::model::{cosine, normalized};
use super::{EmbedError, Embedding};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rank vocabulary entries by cosine to `query`, skipping `exclude`.
fn rank_by_cosine(unit: &[f64], dim: usize, query: &[f64], exclude: &[usize]) -> Vec<(usize, f64)> {
    let q = normalized(query);
    let mut scored: Vec<(usize, f64)> = unit
        .chunks_exact(dim.max(1))
        .enumerate()
        .filter(|(i, _)| !exclude.contains(i))
        .map(|(i, row)| (i, dot(row, &q)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

fn analogy_query(emb: &Embedding, a: &str, b: &str, c: &str) -> Result<Vec<f64>, EmbedError> {
    let (va, vb, vc) = (emb.vector(a)?, emb.vector(b)?, emb.vector(c)?);
    let (ua, ub, uc) = (normalized(&va), normalized(&vb), normalized(&vc));
    Ok((0..emb.dim()).map(|k| ub[k] - ua[k] + uc[k]).collect())
}

/// Answers "a is to b as c is to ?" by ranking all vocabulary tokens by
/// cosine to `b - a + c` on unit vectors.
pub fn analogy(
    emb: &Embedding,
    a: &str,
    b: &str,
    c: &str,
    exclude_inputs: bool,
) -> Result<Vec<(String, f64)>, EmbedError> {
    let query = analogy_query(emb, a, b, c)?;
    let exclude: Vec<usize> = if exclude_inputs {
        [a, b, c].iter().filter_map(|t| emb.vocab.index_of(t)).collect()
    } else {
        Vec::new()
    };
    let unit = emb.unit_vectors();
    Ok(rank_by_cosine(&unit, emb.dim(), &query, &exclude)
        .into_iter()
        .map(|(i, s)| (emb.vocab.token(i).to_string(), s))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub section: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub expected: String,
}

/// Parses the standard analogy format: `: section` headers followed by
/// lines of four whitespace-separated tokens. Tokens are lowercased.
pub fn parse_analogy_file(text: &str) -> Result<Vec<AnalogyQuestion>, EmbedError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            section = Some(name.trim().to_string());
            continue;
        }
        let toks: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
        let [a, b, c, d]: [String; 4] = toks.try_into().map_err(|t: Vec<String>| EmbedError::MalformedBenchmark {
            line: n + 1,
            msg: format!("expected 4 tokens, found {}", t.len()),
        })?;
        let section = section
            .clone()
            .ok_or_else(|| EmbedError::MalformedBenchmark { line: n + 1, msg: "question before any section header".into() })?;
        out.push(AnalogyQuestion { section, a, b, c, expected: d });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionScore {
    pub name: String,
    pub correct: usize,
    pub attempted: usize,
    /// Questions with at least one unresolvable token.
    pub skipped: usize,
}

impl SectionScore {
    /// `None` when every question was skipped.
    pub fn accuracy(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.correct as f64 / self.attempted as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyReport {
    pub sections: Vec<SectionScore>,
    pub overall: SectionScore,
}

/// Top-1 accuracy (inputs excluded) per section and overall.
pub fn evaluate_analogy_suite(emb: &Embedding, questions: &[AnalogyQuestion]) -> AnalogyReport {
    let unit = emb.unit_vectors();
    let mut order: Vec<String> = Vec::new();
    let mut by_section: BTreeMap<String, SectionScore> = BTreeMap::new();
    for q in questions {
        let entry = by_section.entry(q.section.clone()).or_insert_with(|| {
            order.push(q.section.clone());
            SectionScore { name: q.section.clone(), correct: 0, attempted: 0, skipped: 0 }
        });
        // the expected answer must be rankable, so it has to be in the vocabulary
        let query = match (analogy_query(emb, &q.a, &q.b, &q.c), emb.vocab.index_of(&q.expected)) {
            (Ok(v), Some(_)) => v,
            _ => {
                entry.skipped += 1;
                continue;
            }
        };
        let exclude: Vec<usize> = [&q.a, &q.b, &q.c].iter().filter_map(|t| emb.vocab.index_of(t)).collect();
        let top = rank_by_cosine(&unit, emb.dim(), &query, &exclude).first().map(|&(i, _)| i);
        entry.attempted += 1;
        if top.map(|i| emb.vocab.token(i)) == Some(q.expected.as_str()) {
            entry.correct += 1;
        }
    }
    let sections: Vec<SectionScore> = order.iter().map(|s| by_section[s].clone()).collect();
    let overall = SectionScore {
        name: "overall".into(),
        correct: sections.iter().map(|s| s.correct).sum(),
        attempted: sections.iter().map(|s| s.attempted).sum(),
        skipped: sections.iter().map(|s| s.skipped).sum(),
    };
    AnalogyReport { sections, overall }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub a: String,
    pub b: String,
    pub score: f64,
}

/// Parses `token1, token2, score` lines (comma or tab separated). Lines whose
/// score does not parse are treated as headers when they come first.
pub fn parse_similarity_file(text: &str) -> Result<Vec<SimilarityPair>, EmbedError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t']).map(str::trim).collect();
        if fields.len() < 3 {
            return Err(EmbedError::MalformedBenchmark { line: n + 1, msg: "expected 3 fields".into() });
        }
        match fields[2].parse::<f64>() {
            Ok(score) => out.push(SimilarityPair { a: fields[0].to_lowercase(), b: fields[1].to_lowercase(), score }),
            Err(_) if out.is_empty() => continue,
            Err(_) => {
                return Err(EmbedError::MalformedBenchmark { line: n + 1, msg: format!("bad score {:?}", fields[2]) })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub spearman: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Spearman correlation between model cosines and human scores over the
/// resolvable pairs.
pub fn evaluate_similarity(emb: &Embedding, pairs: &[SimilarityPair]) -> Result<SimilarityReport, EmbedError> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    for p in pairs {
        if let (Ok(a), Ok(b)) = (emb.vector(&p.a), emb.vector(&p.b)) {
            model.push(cosine(&a, &b));
            human.push(p.score);
        }
    }
    if model.len() < 2 {
        return Err(EmbedError::TooFewPairs(model.len()));
    }
    Ok(SimilarityReport { spearman: spearman(&model, &human), used: model.len(), skipped: pairs.len() - model.len() })
}

/// The `top_n` vocabulary tokens closest to `token` by cosine, excluding
/// the token itself.
pub fn most_similar(emb: &Embedding, token: &str, top_n: usize) -> Result<Vec<(String, f64)>, EmbedError> {
    let v = emb.vector(token)?;
    let exclude: Vec<usize> = emb.vocab.index_of(token).into_iter().collect();
    let unit = emb.unit_vectors();
    Ok(rank_by_cosine(&unit, emb.dim(), &v, &exclude)
        .into_iter()
        .take(top_n)
        .map(|(i, s)| (emb.vocab.token(i).to_string(), s))
        .collect())
}

/// The token whose cosine to the mean of the other (unit) vectors is lowest.
/// Ties go to the earliest token.
pub fn odd_one_out(emb: &Embedding, tokens: &[&str]) -> Result<String, EmbedError> {
    if tokens.len() < 2 {
        return Err(EmbedError::TooFewTokens { need: 2, got: tokens.len() });
    }
    let units: Vec<Vec<f64>> = tokens.iter().map(|t| emb.vector(t).map(|v| normalized(&v))).collect::<Result<_, _>>()?;
    let dim = emb.dim();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..tokens.len() {
        let mut mean = vec![0.0; dim];
        for (j, u) in units.iter().enumerate() {
            if j != i {
                mean.iter_mut().zip(u).for_each(|(m, x)| *m += x);
            }
        }
        let s = cosine(&units[i], &mean);
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    Ok(tokens[best.expect("at least two tokens").0].to_string())
}

/// Projects the selected token vectors onto the leading `dims` principal
/// axes of their centred covariance. Each axis is oriented so that its
/// largest-magnitude component is positive.
pub fn pca_project(emb: &Embedding, tokens: &[&str], dims: usize) -> Result<Vec<Vec<f64>>, EmbedError> {
    if tokens.len() < 2 {
        return Err(EmbedError::TooFewTokens { need: 2, got: tokens.len() });
    }
    let vectors: Vec<Vec<f64>> = tokens.iter().map(|t| emb.vector(t)).collect::<Result<_, _>>()?;
    Ok(pca(&vectors, dims))
}

/// PCA scores of row vectors.
pub(crate) fn pca(vectors: &[Vec<f64>], dims: usize) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let m = vectors[0].len();
    let mut mean = vec![0.0; m];
    for v in vectors {
        mean.iter_mut().zip(v).for_each(|(a, x)| *a += x / n as f64);
    }
    let x = DMatrix::from_fn(n, m, |i, j| vectors[i][j] - mean[j]);
    let cov = x.transpose() * &x / (n as f64 - 1.0).max(1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let dims = dims.min(m);
    let axes: Vec<Vec<f64>> = order[..dims]
        .iter()
        .map(|&c| {
            let col: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if pivot < 0.0 {
                col.iter().map(|v| -v).collect()
            } else {
                col
            }
        })
        .collect();
    (0..n)
        .map(|i| axes.iter().map(|ax| (0..m).map(|j| x[(i, j)] * ax[j]).sum()).collect())
        .collect()
}

/// Full-softmax context distribution `p(c | token)` over the vocabulary;
/// meant for tiny vocabularies in tests.
pub fn softmax_probabilities(emb: &Embedding, token: usize) -> Vec<f64> {
    let h = emb.vector_at(token);
    let logits: Vec<f64> = (0..emb.vocab.len())
        .map(|j| emb.matrix.output_row(j).iter().zip(&h).map(|(&o, x)| o as f64 * x).sum())
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingMatrix, Vocabulary};

    pub(crate) fn hand_embedding(rows: &[(&str, &[f64])]) -> Embedding {
        let dim = rows[0].1.len();
        let vocab = Vocabulary::from_parts(rows.iter().map(|r| r.0.to_string()).collect(), vec![5; rows.len()], None);
        let mut m = EmbeddingMatrix::zeros(rows.len(), rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            for (k, &v) in r.1.iter().enumerate() {
                m.input_row_mut(i)[k] = v as f32;
                m.output_row_mut(i)[k] = (v * 0.5) as f32;
            }
        }
        Embedding { vocab, matrix: m }
    }

    fn five() -> Embedding {
        // d = b - a + c lands exactly on "d"
        hand_embedding(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("b", &[0.0, 1.0, 0.0]),
            ("c", &[0.0, 0.0, 1.0]),
            ("d", &[-1.0, 1.0, 1.0]),
            ("e", &[1.0, 1.0, 1.0]),
        ])
    }

    #[test]
    fn analogy_top1_constructed() {
        let e = five();
        let r = analogy(&e, "a", "b", "c", true).unwrap();
        assert_eq!(r[0].0, "d");
        assert!((r[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn analogy_a_equals_b_is_neighbours_of_c() {
        let e = five();
        let r: Vec<String> = analogy(&e, "a", "a", "c", false).unwrap().into_iter().map(|x| x.0).collect();
        let mut n: Vec<String> = most_similar(&e, "c", 10).unwrap().into_iter().map(|x| x.0).collect();
        n.insert(0, "c".into());
        assert_eq!(r, n);
    }

    #[test]
    fn word2vec_oov_inputs() {
        let e = five();
        assert!(matches!(analogy(&e, "zz", "b", "c", true), Err(EmbedError::TokenNotFound(_))));
    }

    #[test]
    fn suite_scores_and_skips() {
        let e = five();
        let text = ": s1\na b c d\nA B C D\n: s2\nq b c d\n";
        let qs = parse_analogy_file(text).unwrap();
        let r = evaluate_analogy_suite(&e, &qs);
        assert_eq!(r.sections[0].accuracy(), Some(1.0));
        assert_eq!(r.sections[1].accuracy(), None);
        assert_eq!(r.sections[1].skipped, 1);
        assert_eq!(r.overall.attempted, 2);
    }

    #[test]
    fn malformed_benchmark() {
        assert!(matches!(parse_analogy_file(": s\na b c\n"), Err(EmbedError::MalformedBenchmark { line: 2, .. })));
        assert!(matches!(parse_analogy_file("a b c d\n"), Err(EmbedError::MalformedBenchmark { .. })));
    }

    #[test]
    fn similarity_perfect_and_reversed() {
        let e = five();
        let pairs = |scores: [f64; 3]| {
            vec![
                SimilarityPair { a: "a".into(), b: "e".into(), score: scores[0] },
                SimilarityPair { a: "a".into(), b: "b".into(), score: scores[1] },
                SimilarityPair { a: "a".into(), b: "d".into(), score: scores[2] },
            ]
        };
        // cosines: a·e = 0.577, a·b = 0, a·d = -0.577
        assert!((evaluate_similarity(&e, &pairs([3.0, 2.0, 1.0])).unwrap().spearman - 1.0).abs() < 1e-12);
        assert!((evaluate_similarity(&e, &pairs([1.0, 2.0, 3.0])).unwrap().spearman + 1.0).abs() < 1e-12);
        let one = vec![pairs([1.0, 2.0, 3.0])[0].clone()];
        assert!(matches!(evaluate_similarity(&e, &one), Err(EmbedError::TooFewPairs(1))));
    }

    #[test]
    fn similarity_file_formats() {
        let p = parse_similarity_file("w1,w2,score\nTiger, cat, 7.35\nbook\tpaper\t7.46\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].a, "tiger");
        assert_eq!(p[1].score, 7.46);
    }

    #[test]
    fn odd_one_orthogonal() {
        let e = hand_embedding(&[("x", &[1.0, 0.1]), ("y", &[1.0, -0.1]), ("z", &[0.0, 1.0])]);
        assert_eq!(odd_one_out(&e, &["x", "y", "z"]).unwrap(), "z");
        assert_eq!(odd_one_out(&e, &["z", "z", "x"]).unwrap(), "x");
    }

    #[test]
    fn pca_flat_subspace() {
        let e = hand_embedding(&[
            ("a", &[1.0, 2.0, 0.0]),
            ("b", &[3.0, -1.0, 0.0]),
            ("c", &[0.5, 0.5, 0.0]),
            ("d", &[-2.0, 1.0, 0.0]),
        ]);
        let toks = ["a", "b", "c", "d"];
        let p = pca_project(&e, &toks, 2).unwrap();
        let v1: f64 = p.iter().map(|r| r[0] * r[0]).sum();
        let v2: f64 = p.iter().map(|r| r[1] * r[1]).sum();
        assert!(v1 >= v2);
        // total variance preserved when the data spans two dimensions
        let mean = [0.625, 0.625];
        let total: f64 = toks
            .iter()
            .map(|t| {
                let v = e.vector(t).unwrap();
                (v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2)
            })
            .sum();
        assert!((v1 + v2 - total).abs() < 1e-9);
    }

    #[test]
    fn softmax_sums_to_one() {
        let e = five();
        for i in 0..5 {
            let p = softmax_probabilities(&e, i);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
