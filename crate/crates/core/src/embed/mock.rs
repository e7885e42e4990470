use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::EmbeddingBackend;
use crate::error::Result;
use crate::profile::for_each_ngram;

/// Deterministic stand-in for a language model.
///
/// Every character 2–4-gram of the text selects a Gaussian row of an
/// implicit projection matrix (the row is regenerated from a seeded hash of
/// the n-gram); the rows are summed and the result L2-normalized. Texts
/// without n-grams use the whole text as their only token.
pub fn mock_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "embedding dimension must be at least 1");
    let mut acc = vec![0.0; dim];
    let mut add_token = |token: &str| {
        let mut rng = ChaCha8Rng::seed_from_u64(xxh3_64_with_seed(token.as_bytes(), seed));
        for a in acc.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *a += z;
        }
    };
    let mut any = false;
    for_each_ngram(text, 2, 4, |g| {
        any = true;
        add_token(g);
    });
    if !any {
        add_token(text);
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    acc.iter_mut().for_each(|v| *v /= norm);
    acc
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    model_id: String,
    dim: usize,
    seed: u64,
}

impl MockBackend {
    pub fn new(model_id: impl Into<String>, dim: usize, seed: u64) -> Self {
        MockBackend {
            model_id: model_id.into(),
            dim,
            seed,
        }
    }
}

impl EmbeddingBackend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| mock_embed(t, self.dim, self.seed)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn deterministic_and_normalized() {
        let a = mock_embed("abc", 48, 1);
        assert_eq!(a, mock_embed("abc", 48, 1));
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        for text in ["", "x", "a longer sentence with spaces", "ÜNÏCÖDÉ"] {
            let v = mock_embed(text, 17, 3);
            let n = cosine(&v, &v).sqrt();
            assert!((n - 1.0).abs() < 1e-9, "{text:?}: {n}");
        }
        assert_ne!(mock_embed("abc", 48, 1), mock_embed("abc", 48, 2));
    }

    #[test]
    fn shared_ngrams_correlate() {
        let dim = 256;
        let base = mock_embed("international business", dim, 0);
        let near = mock_embed("international busyness", dim, 0);
        let far = mock_embed("qqq zzz", dim, 0);
        assert!(cosine(&base, &near) > 0.5);
        assert!(cosine(&base, &near) > cosine(&base, &far));
    }
}
