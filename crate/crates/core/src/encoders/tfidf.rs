//! Character n-gram TF-IDF.
//!
//! Raw term counts are weighted by the smoothed inverse document frequency
//! `ln((1 + N) / (1 + df)) + 1` and each row is L2-normalized. When the fit
//! corpus has more distinct n-grams than `max_features`, terms are bucketed
//! by hash instead of kept in an explicit vocabulary.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::persist::Persist;
use crate::profile::for_each_ngram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfParams {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
}

impl Default for TfidfParams {
    fn default() -> Self {
        TfidfParams {
            ngram_min: 2,
            ngram_max: 3,
            max_features: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    params: TfidfParams,
    /// Term to column index; empty when the model hashes terms.
    vocabulary: BTreeMap<String, usize>,
    hashed: bool,
    idf: Vec<f64>,
}

impl Persist for TfidfModel {
    const KIND: &'static str = "tfidf";
}

fn term_counts(doc: &str, params: &TfidfParams) -> HashMap<String, u32> {
    let mut counts: HashMap<String, u32> = HashMap::new();
    for_each_ngram(doc, params.ngram_min, params.ngram_max, |g| match counts.get_mut(g) {
        Some(c) => *c += 1,
        None => {
            counts.insert(g.to_string(), 1);
        }
    });
    counts
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(docs: &[S], params: TfidfParams) -> Result<Self> {
        if params.max_features == 0 {
            return Err(Error::invalid("max_features must be positive"));
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            for term in term_counts(doc.as_ref(), &params).into_keys() {
                *df.entry(term).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::invalid("TF-IDF corpus has no n-grams (all documents empty)"));
        }
        let n_docs = docs.len() as f64;
        let idf_of = |d: usize| ((1.0 + n_docs) / (1.0 + d as f64)).ln() + 1.0;

        if df.len() <= params.max_features {
            let mut terms: Vec<(String, usize)> = df.into_iter().collect();
            terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            let idf = terms.iter().map(|(_, d)| idf_of(*d)).collect();
            let vocabulary = terms.into_iter().enumerate().map(|(i, (t, _))| (t, i)).collect();
            Ok(TfidfModel {
                params,
                vocabulary,
                hashed: false,
                idf,
            })
        } else {
            // Bucket document frequency counts documents containing any term
            // of the bucket.
            let mut bucket_df = vec![0usize; params.max_features];
            for doc in docs {
                let mut buckets: Vec<usize> = term_counts(doc.as_ref(), &params)
                    .into_keys()
                    .map(|t| bucket(&t, params.max_features))
                    .collect();
                buckets.sort_unstable();
                buckets.dedup();
                for b in buckets {
                    bucket_df[b] += 1;
                }
            }
            Ok(TfidfModel {
                params,
                vocabulary: BTreeMap::new(),
                hashed: true,
                idf: bucket_df.into_iter().map(idf_of).collect(),
            })
        }
    }

    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    pub fn is_hashed(&self) -> bool {
        self.hashed
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    fn column_of(&self, term: &str) -> Option<usize> {
        if self.hashed {
            Some(bucket(term, self.params.max_features))
        } else {
            self.vocabulary.get(term).copied()
        }
    }

    pub fn transform<S: AsRef<str>>(&self, docs: &[S]) -> SparseMatrix {
        let mut out = SparseMatrix::new(self.n_features());
        for doc in docs {
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for (term, count) in term_counts(doc.as_ref(), &self.params) {
                if let Some(j) = self.column_of(&term) {
                    *row.entry(j).or_default() += count as f64;
                }
            }
            for (j, v) in row.iter_mut() {
                *v *= self.idf[*j];
            }
            let norm = row.values().map(|v| v * v).sum::<f64>().sqrt();
            out.push_row(row.into_iter().map(|(j, v)| (j, v / norm)));
        }
        out
    }
}

fn bucket(term: &str, n_buckets: usize) -> usize {
    (xxh3_64(term.as_bytes()) % n_buckets as u64) as usize
}

pub fn tfidf_fit_transform<S: AsRef<str>>(docs: &[S], params: TfidfParams) -> Result<(TfidfModel, SparseMatrix)> {
    let model = TfidfModel::fit(docs, params)?;
    let m = model.transform(docs);
    Ok((model, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range2() -> TfidfParams {
        TfidfParams {
            ngram_min: 2,
            ngram_max: 2,
            ..Default::default()
        }
    }

    #[test]
    fn single_term_corpus() {
        let (_, m) = tfidf_fit_transform(&["ab", "ab"], range2()).unwrap();
        assert_eq!(m.to_dense("t").row(0), &[1.0]);
        assert_eq!(m.to_dense("t").row(1), &[1.0]);
    }

    #[test]
    fn disjoint_terms_are_orthogonal() {
        let (model, m) = tfidf_fit_transform(&["ab", "cd"], range2()).unwrap();
        let d = m.to_dense("t");
        assert_eq!(d.row(0), &[1.0, 0.0]);
        assert_eq!(d.row(1), &[0.0, 1.0]);
        let expected_idf = (3.0f64 / 2.0).ln() + 1.0;
        assert!(model.idf().iter().all(|&w| (w - expected_idf).abs() < 1e-15));
        let unseen = model.transform(&["zz"]);
        assert_eq!(unseen.nnz(), 0);
    }

    #[test]
    fn idf_and_norms_on_mixed_corpus() {
        let docs = ["abab", "abc", "", "xyz"];
        let (model, m) = tfidf_fit_transform(&docs, range2()).unwrap();
        // "ab" occurs in two of four documents.
        let ab = model.vocabulary()["ab"];
        assert!((model.idf()[ab] - ((5.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
        assert!(model.idf().iter().all(|&w| w >= 1.0));
        for i in 0..docs.len() {
            let n = m.row_norm(i);
            assert!(if docs[i].is_empty() { n == 0.0 } else { (n - 1.0).abs() < 1e-12 });
        }
    }

    #[test]
    fn all_empty_corpus_is_an_error() {
        assert!(TfidfModel::fit(&["", "a"], TfidfParams::default()).is_err());
    }

    #[test]
    fn hashing_beyond_cap() {
        let docs: Vec<String> = (0..50).map(|i| format!("doc{i:03}")).collect();
        let params = TfidfParams { max_features: 16, ..Default::default() };
        let (model, m) = tfidf_fit_transform(&docs, params).unwrap();
        assert!(model.is_hashed());
        assert_eq!(model.n_features(), 16);
        assert_eq!(m.n_cols(), 16);
        let again = model.transform(&docs);
        assert_eq!(again, m);
        for i in 0..docs.len() {
            assert!((m.row_norm(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_round_trips() {
        let (model, _) = tfidf_fit_transform(&["hello", "world"], TfidfParams::default()).unwrap();
        let back = TfidfModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
