use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::WeightedAliasIndex;

/// Draws noise tokens from the unigram distribution raised to `exponent`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    probs: Vec<f64>,
    table: WeightedAliasIndex<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], exponent: f64) -> Self {
        assert!(!counts.is_empty(), "sampler needs a non-empty vocabulary");
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let z: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / z).collect();
        let table = WeightedAliasIndex::new(weights).expect("positive weights");
        Self { probs, table }
    }

    /// Normalised sampling probability of each token.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `k` i.i.d. draws; draws equal to `exclude` are redrawn unless it is the
    /// only token with positive probability.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, exclude: usize, out: &mut Vec<usize>) {
        out.clear();
        let can_avoid = self.probs.get(exclude).is_none_or(|&p| p < 1.0);
        while out.len() < k {
            let d = self.table.sample(rng);
            if d == exclude && can_avoid {
                continue;
            }
            out.push(d);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, exclude: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(rng, k, exclude, &mut out);
        out
    }
}

/// Convenience wrapper over [`NegativeSampler`].
pub fn negative_sample<R: Rng + ?Sized>(
    counts: &[u64],
    exponent: f64,
    rng: &mut R,
    k: usize,
    exclude: usize,
) -> Vec<usize> {
    NegativeSampler::new(counts, exponent).sample(rng, k, exclude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(negative_sample(&[7], 0.75, &mut rng, 5, 3), vec![0; 5]);
        // the only token is excluded: cannot redraw
        assert_eq!(negative_sample(&[7], 0.75, &mut rng, 3, 0), vec![0; 3]);
    }

    #[test]
    fn closed_form_probability_and_frequency() {
        let s = NegativeSampler::new(&[8, 1], 0.75);
        let expected = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        assert!((s.probabilities()[0] - expected).abs() < 1e-12);
        assert!((expected - 0.826).abs() < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = s.sample(&mut rng, 1_000_000, usize::MAX);
        let freq = draws.iter().filter(|&&d| d == 0).count() as f64 / draws.len() as f64;
        assert!((freq - expected).abs() < 0.01, "{freq}");
    }

    #[test]
    fn exponent_zero_is_uniform() {
        let s = NegativeSampler::new(&[1, 100, 10_000], 0.0);
        for p in s.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exclusion_redraws() {
        let s = NegativeSampler::new(&[5, 5, 5], 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = s.sample(&mut rng, 10_000, 1);
        assert_eq!(d.len(), 10_000);
        assert!(d.iter().all(|&x| x != 1));
    }
}
