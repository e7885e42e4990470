//! MinHash sketches over character n-gram sets.
//!
//! Component `j` of a sketch is the minimum, over the string's n-grams, of
//! an xxh3 hash seeded with `seed + j`. Two sketches agree on a component
//! with probability equal to the Jaccard similarity of the n-gram sets.

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::matrix::FeatureMatrix;
use crate::persist::Persist;
use crate::profile::for_each_ngram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinHashParams {
    pub dim: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
}

impl Default for MinHashParams {
    fn default() -> Self {
        MinHashParams {
            dim: 30,
            n_min: 2,
            n_max: 4,
            seed: 0,
        }
    }
}

impl Persist for MinHashParams {
    const KIND: &'static str = "minhash";
}

/// Raw 64-bit signature. Strings without any n-gram get `u64::MAX` in every
/// component.
pub fn minhash_signature(value: &str, params: &MinHashParams) -> Vec<u64> {
    assert!(params.dim >= 1, "MinHash dimension must be at least 1");
    let mut mins = vec![u64::MAX; params.dim];
    for_each_ngram(value, params.n_min, params.n_max, |g| {
        let bytes = g.as_bytes();
        for (j, m) in mins.iter_mut().enumerate() {
            let h = xxh3_64_with_seed(bytes, params.seed.wrapping_add(j as u64));
            if h < *m {
                *m = h;
            }
        }
    });
    mins
}

/// Fraction of agreeing components.
pub fn estimate_jaccard(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len(), "signatures of different length");
    let equal = a.iter().zip(b).filter(|(x, y)| x == y).count();
    equal as f64 / a.len() as f64
}

/// Encodes each value as its signature scaled into `[0, 1]`.
pub fn minhash_encode<S: AsRef<str>>(values: &[S], params: &MinHashParams) -> FeatureMatrix {
    let names = (0..params.dim).map(|j| format!("minhash_{j}")).collect();
    let mut out = FeatureMatrix::zeros(values.len(), names);
    for (i, v) in values.iter().enumerate() {
        let sig = minhash_signature(v.as_ref(), params);
        for (dst, h) in out.row_mut(i).iter_mut().zip(sig) {
            *dst = h as f64 / u64::MAX as f64;
        }
    }
    out
}
