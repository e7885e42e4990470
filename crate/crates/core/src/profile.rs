//! Column diversity profiling.
//!
//! The diversity of a string column is the number of distinct character
//! n-grams found in a random sample of its rows. Columns at or below the
//! regime threshold behave like dirty categories; columns above it hold
//! diverse entries that benefit from language-model embeddings.

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const DEFAULT_NGRAM_MIN: usize = 2;
pub const DEFAULT_NGRAM_MAX: usize = 4;
pub const DEFAULT_REGIME_THRESHOLD: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Dirty,
    Diverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramProfile {
    pub column: String,
    pub sample_size: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub unique_ngrams: usize,
    pub regime: Regime,
}

/// Calls `f` on every contiguous substring of `s` (lowercased, counted in
/// Unicode scalar values) whose length lies in `n_min..=n_max`. Duplicates
/// are reported as often as they occur.
pub fn for_each_ngram(s: &str, n_min: usize, n_max: usize, mut f: impl FnMut(&str)) {
    assert!(n_min >= 1 && n_min <= n_max, "invalid n-gram range {n_min}..={n_max}");
    let lower = s.to_lowercase();
    // Byte offset of every char boundary, including the end of the string.
    let bounds: Vec<usize> = lower
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(lower.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    for n in n_min..=n_max.min(n_chars) {
        for start in 0..=(n_chars - n) {
            f(&lower[bounds[start]..bounds[start + n]]);
        }
    }
}

pub fn char_ngrams(s: &str, n_min: usize, n_max: usize) -> HashSet<String> {
    let mut out = HashSet::new();
    for_each_ngram(s, n_min, n_max, |g| {
        if !out.contains(g) {
            out.insert(g.to_string());
        }
    });
    out
}

pub fn classify_regime(unique_ngrams: usize, threshold: usize) -> Regime {
    if unique_ngrams <= threshold {
        Regime::Dirty
    } else {
        Regime::Diverse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub sample_size: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub threshold: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            sample_size: DEFAULT_SAMPLE_SIZE,
            n_min: DEFAULT_NGRAM_MIN,
            n_max: DEFAULT_NGRAM_MAX,
            threshold: DEFAULT_REGIME_THRESHOLD,
        }
    }
}

/// Rows drawn (without replacement) for profiling, in ascending order.
pub fn sample_rows(n_rows: usize, sample_size: usize, seed: u64) -> Vec<usize> {
    if sample_size >= n_rows {
        return (0..n_rows).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n_rows, sample_size).into_vec();
    rows.sort_unstable();
    rows
}

pub fn count_unique_ngrams<'a>(values: impl IntoIterator<Item = &'a str>, n_min: usize, n_max: usize) -> usize {
    let mut seen: HashSet<String> = HashSet::new();
    for v in values {
        for_each_ngram(v, n_min, n_max, |g| {
            if !seen.contains(g) {
                seen.insert(g.to_string());
            }
        });
    }
    seen.len()
}

pub fn profile_column(column: &str, values: &[String], params: &ProfileParams, seed: u64) -> NgramProfile {
    let rows = sample_rows(values.len(), params.sample_size, seed);
    let unique_ngrams = count_unique_ngrams(rows.iter().map(|&r| values[r].as_str()), params.n_min, params.n_max);
    NgramProfile {
        column: column.to_string(),
        sample_size: rows.len(),
        n_min: params.n_min,
        n_max: params.n_max,
        unique_ngrams,
        regime: classify_regime(unique_ngrams, params.threshold),
    }
}
