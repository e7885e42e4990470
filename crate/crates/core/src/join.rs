//! Many-to-one fuzzy join by exact nearest-neighbor search.
//!
//! Every right-table key is matched to the left-table key with the highest
//! cosine similarity (lowest left index on ties). The match is rejected
//! (⊥) when that similarity falls below the threshold. Left rows may
//! receive any number of right rows.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::encoders::{minhash_encode, MinHashParams, TfidfModel, TfidfParams};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseMatrix};
use crate::table::Table;

pub const DEFAULT_THRESHOLDS: [f64; 7] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinEncoder {
    Tfidf,
    MinHash,
    Embedding,
}

impl std::str::FromStr for JoinEncoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfidf" | "tf-idf" => Ok(JoinEncoder::Tfidf),
            "minhash" => Ok(JoinEncoder::MinHash),
            "embedding" | "embeddings" => Ok(JoinEncoder::Embedding),
            other => Err(Error::invalid(format!("unknown join encoder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub left_key: String,
    pub right_key: String,
    pub encoder: JoinEncoder,
    /// Minimum cosine similarity for a match.
    pub threshold: f64,
    #[serde(default)]
    pub tfidf: TfidfParams,
    #[serde(default)]
    pub minhash: MinHashParams,
}

impl JoinSpec {
    pub fn new(left_key: &str, right_key: &str, encoder: JoinEncoder, threshold: f64) -> Self {
        JoinSpec {
            left_key: left_key.to_string(),
            right_key: right_key.to_string(),
            encoder,
            threshold,
            tfidf: TfidfParams::default(),
            minhash: MinHashParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinMatch {
    /// Matched left row, `None` for ⊥.
    pub left: Option<usize>,
    /// Similarity of the nearest left row, reported even when rejected.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinResult {
    pub matches: Vec<JoinMatch>,
    pub n_predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_predicted: usize,
    pub n_correct: usize,
    pub n_gold: usize,
}

/// L2-normalized key vectors for both sides.
#[derive(Debug, Clone)]
pub enum KeyVectors {
    Dense { right: FeatureMatrix, left: FeatureMatrix },
    Sparse { right: SparseMatrix, left: SparseMatrix },
}

pub fn encode_keys(
    right: &[String],
    left: &[String],
    spec: &JoinSpec,
    embedder: Option<&Embedder>,
) -> Result<KeyVectors> {
    match spec.encoder {
        JoinEncoder::Tfidf => {
            let corpus: Vec<&str> = left.iter().chain(right).map(String::as_str).collect();
            let model = TfidfModel::fit(&corpus, spec.tfidf)?;
            Ok(KeyVectors::Sparse {
                right: model.transform(right),
                left: model.transform(left),
            })
        }
        JoinEncoder::MinHash => {
            let mut r = minhash_encode(right, &spec.minhash);
            let mut l = minhash_encode(left, &spec.minhash);
            r.normalize_rows();
            l.normalize_rows();
            Ok(KeyVectors::Dense { right: r, left: l })
        }
        JoinEncoder::Embedding => {
            let embedder = embedder.ok_or_else(|| Error::invalid("embedding join needs an embedding backend"))?;
            let mut l = embedder.embed_batch(left)?;
            let mut r = embedder.embed_batch(right)?;
            l.normalize_rows();
            r.normalize_rows();
            Ok(KeyVectors::Dense { right: r, left: l })
        }
    }
}

const RIGHT_CHUNK: usize = 32;
const LEFT_BLOCK: usize = 256;

/// Best left row and its similarity for every right row. Each similarity is
/// a dot product accumulated in ascending column order.
pub fn nearest_neighbors(keys: &KeyVectors) -> Vec<(usize, f64)> {
    match keys {
        KeyVectors::Dense { right, left } => {
            assert_eq!(right.n_cols(), left.n_cols(), "key vectors of different width");
            let chunks: Vec<usize> = (0..right.n_rows()).step_by(RIGHT_CHUNK).collect();
            chunks
                .par_iter()
                .flat_map_iter(|&start| {
                    let end = (start + RIGHT_CHUNK).min(right.n_rows());
                    let mut best = vec![(0usize, f64::NEG_INFINITY); end - start];
                    for block in (0..left.n_rows()).step_by(LEFT_BLOCK) {
                        let block_end = (block + LEFT_BLOCK).min(left.n_rows());
                        for (slot, r) in best.iter_mut().zip(start..end) {
                            let rv = right.row(r);
                            for l in block..block_end {
                                let sim = dot(rv, left.row(l));
                                if sim > slot.1 {
                                    *slot = (l, sim);
                                }
                            }
                        }
                    }
                    best
                })
                .collect()
        }
        KeyVectors::Sparse { right, left } => {
            // Postings per column, left rows ascending.
            let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); left.n_cols()];
            for l in 0..left.n_rows() {
                let (idx, vals) = left.row(l);
                for (&j, &v) in idx.iter().zip(vals) {
                    postings[j].push((l, v));
                }
            }
            (0..right.n_rows())
                .into_par_iter()
                .map(|r| {
                    let mut acc = vec![0.0f64; left.n_rows()];
                    let (idx, vals) = right.row(r);
                    for (&j, &w) in idx.iter().zip(vals) {
                        for &(l, v) in &postings[j] {
                            acc[l] += w * v;
                        }
                    }
                    acc.iter()
                        .enumerate()
                        .fold((0usize, f64::NEG_INFINITY), |best, (l, &s)| if s > best.1 { (l, s) } else { best })
                })
                .collect()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn apply_threshold(nearest: &[(usize, f64)], threshold: f64) -> JoinResult {
    let matches: Vec<JoinMatch> = nearest
        .iter()
        .map(|&(l, sim)| JoinMatch {
            left: (sim >= threshold).then_some(l),
            similarity: sim,
        })
        .collect();
    let n_predicted = matches.iter().filter(|m| m.left.is_some()).count();
    JoinResult { matches, n_predicted }
}

fn key_columns<'a>(right: &'a Table, left: &'a Table, spec: &JoinSpec) -> Result<(&'a [String], &'a [String])> {
    if !(0.0..=1.0).contains(&spec.threshold) {
        return Err(Error::invalid(format!("threshold {} outside [0, 1]", spec.threshold)));
    }
    if left.n_rows() == 0 {
        return Err(Error::invalid("the left table is empty"));
    }
    Ok((right.require_column(&spec.right_key)?, left.require_column(&spec.left_key)?))
}

pub fn join(right: &Table, left: &Table, spec: &JoinSpec, embedder: Option<&Embedder>) -> Result<JoinResult> {
    let (r, l) = key_columns(right, left, spec)?;
    let keys = encode_keys(r, l, spec, embedder)?;
    Ok(apply_threshold(&nearest_neighbors(&keys), spec.threshold))
}

/// Precision, recall and F1 of predicted matches against `gold` (one entry
/// per right row, `None` meaning no match). Zero denominators give zero.
pub fn evaluate_join(result: &JoinResult, gold: &[Option<usize>]) -> Result<JoinMetrics> {
    if gold.len() != result.matches.len() {
        return Err(Error::DimensionMismatch {
            expected: result.matches.len(),
            found: gold.len(),
        });
    }
    let n_predicted = result.matches.iter().filter(|m| m.left.is_some()).count();
    let n_gold = gold.iter().filter(|g| g.is_some()).count();
    let n_correct = result
        .matches
        .iter()
        .zip(gold)
        .filter(|(m, g)| m.left.is_some() && m.left == **g)
        .count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(n_correct, n_predicted);
    let recall = ratio(n_correct, n_gold);
    // Harmonic mean of precision and recall, in a form without rounding
    // from the intermediate ratios.
    let f1 = ratio(2 * n_correct, n_predicted + n_gold);
    Ok(JoinMetrics {
        precision,
        recall,
        f1,
        n_predicted,
        n_correct,
        n_gold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub tau: f64,
    pub metrics: JoinMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: Vec<ThresholdPoint>,
    pub best_tau: f64,
    pub best_f1: f64,
}

impl SweepResult {
    pub fn write_curve_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "precision", "recall", "f1", "n_predicted"])?;
        for p in &self.curve {
            w.write_record([
                p.tau.to_string(),
                p.metrics.precision.to_string(),
                p.metrics.recall.to_string(),
                p.metrics.f1.to_string(),
                p.metrics.n_predicted.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<curve writer>", e))?;
        Ok(())
    }
}

/// Encodes once and scores every threshold on the cached similarities. The
/// best threshold is the first one reaching the maximal F1.
pub fn sweep_thresholds(
    right: &Table,
    left: &Table,
    spec: &JoinSpec,
    taus: &[f64],
    gold: &[Option<usize>],
    embedder: Option<&Embedder>,
) -> Result<SweepResult> {
    let (r, l) = key_columns(right, left, spec)?;
    let keys = encode_keys(r, l, spec, embedder)?;
    sweep_nearest(&nearest_neighbors(&keys), taus, gold)
}

pub fn sweep_nearest(nearest: &[(usize, f64)], taus: &[f64], gold: &[Option<usize>]) -> Result<SweepResult> {
    if taus.is_empty() {
        return Err(Error::invalid("no thresholds to sweep"));
    }
    let curve: Vec<ThresholdPoint> = taus
        .iter()
        .map(|&tau| {
            Ok(ThresholdPoint {
                tau,
                metrics: evaluate_join(&apply_threshold(nearest, tau), gold)?,
            })
        })
        .collect::<Result<_>>()?;
    let best = curve
        .iter()
        .fold(&curve[0], |best, p| if p.metrics.f1 > best.metrics.f1 { p } else { best });
    Ok(SweepResult {
        best_tau: best.tau,
        best_f1: best.metrics.f1,
        curve,
    })
}

/// Reads gold matches from a CSV with `right_id,left_id` columns (0-based
/// row indices; an empty `left_id` means no match). Every right row must
/// appear exactly once.
pub fn load_gold(path: impl AsRef<Path>, n_right: usize, n_left: usize) -> Result<Vec<Option<usize>>> {
    let path = path.as_ref();
    let table = crate::table::load_csv(path, b',', true)?;
    let rights = table.require_column("right_id")?;
    let lefts = table.require_column("left_id")?;
    let mut gold: Vec<Option<Option<usize>>> = vec![None; n_right];
    let parse = |s: &str, bound: usize, what: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v < bound)
            .ok_or_else(|| Error::invalid(format!("{}: bad {what} {s:?}", path.display())))
    };
    for (r, l) in rights.iter().zip(lefts) {
        let r = parse(r, n_right, "right_id")?;
        let l = if l.trim().is_empty() { None } else { Some(parse(l, n_left, "left_id")?) };
        if gold[r].replace(l).is_some() {
            return Err(Error::invalid(format!("{}: right_id {r} listed twice", path.display())));
        }
    }
    gold.into_iter()
        .enumerate()
        .map(|(r, g)| g.ok_or_else(|| Error::invalid(format!("{}: no gold entry for right row {r}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_table(values: &[&str]) -> Table {
        Table::new("t", vec!["k".into()], vec![values.iter().map(|s| s.to_string()).collect()]).unwrap()
    }

    #[test]
    fn identical_keys_match_themselves() {
        let t = key_table(&["paris", "london", "berlin", "madrid"]);
        for enc in [JoinEncoder::Tfidf, JoinEncoder::MinHash] {
            let res = join(&t, &t, &JoinSpec::new("k", "k", enc, 0.9), None).unwrap();
            let gold: Vec<Option<usize>> = (0..4).map(Some).collect();
            let m = evaluate_join(&res, &gold).unwrap();
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0), "{enc:?}");
        }
    }

    #[test]
    fn below_threshold_is_rejected() {
        let res = apply_threshold(&[(3, 0.2), (1, 0.35)], 0.3);
        assert_eq!(res.matches[0].left, None);
        assert_eq!(res.matches[1].left, Some(1));
        assert_eq!(res.n_predicted, 1);
    }

    #[test]
    fn metrics_hand_cases() {
        let perfect = apply_threshold(&[(0, 1.0), (1, 1.0)], 0.5);
        let m = evaluate_join(&perfect, &[Some(0), Some(1)]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));

        let none = apply_threshold(&[(0, 0.1), (1, 0.1)], 0.5);
        let m = evaluate_join(&none, &[Some(0), Some(1)]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));

        // 2 correct of 3 predicted, 4 gold matches.
        let res = apply_threshold(&[(0, 0.9), (1, 0.9), (0, 0.9), (3, 0.1), (4, 0.1)], 0.5);
        let gold = [Some(0), Some(1), Some(2), Some(3), Some(4)];
        let gold = &gold[..];
        let mut g = gold.to_vec();
        g[4] = None;
        let m = evaluate_join(&res, &g).unwrap();
        assert_eq!(m.precision, 2.0 / 3.0);
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.f1, 4.0 / 7.0);
    }

    #[test]
    fn ties_go_to_lowest_left_index() {
        let left = key_table(&["abc", "xyz", "abc"]);
        let right = key_table(&["abc"]);
        for enc in [JoinEncoder::Tfidf, JoinEncoder::MinHash] {
            let res = join(&right, &left, &JoinSpec::new("k", "k", enc, 0.0), None).unwrap();
            assert_eq!(res.matches[0].left, Some(0));
        }
    }

    #[test]
    fn encoder_names_parse() {
        assert_eq!("TF-IDF".parse::<JoinEncoder>().unwrap(), JoinEncoder::Tfidf);
        assert_eq!("minhash".parse::<JoinEncoder>().unwrap(), JoinEncoder::MinHash);
        assert!("bert".parse::<JoinEncoder>().is_err());
    }

    #[test]
    fn errors() {
        let t = key_table(&["a"]);
        assert!(join(&t, &t, &JoinSpec::new("k", "k", JoinEncoder::MinHash, 1.5), None).is_err());
        assert!(join(&t, &t, &JoinSpec::new("k", "nope", JoinEncoder::MinHash, 0.5), None).is_err());
        assert!(join(&t, &t, &JoinSpec::new("k", "k", JoinEncoder::Embedding, 0.5), None).is_err());
    }

    #[test]
    fn gold_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.csv");
        std::fs::write(&path, "right_id,left_id\n1,0\n0,\n").unwrap();
        assert_eq!(load_gold(&path, 2, 1).unwrap(), vec![None, Some(0)]);
        assert!(load_gold(&path, 3, 1).is_err());
        std::fs::write(&path, "right_id,left_id\n0,5\n").unwrap();
        assert!(load_gold(&path, 1, 2).is_err());
    }
}
