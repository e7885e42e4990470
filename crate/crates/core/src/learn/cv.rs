//! Fold construction and cross-validated evaluation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mean_and_stderr, roc_auc};
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 7;

/// Stratified fold index per row. Each class is shuffled with the seed and
/// dealt round-robin, continuing the deal across classes so fold sizes
/// differ by at most one.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rows.shuffle(&mut rng);
        for r in rows {
            assignment[r] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Assigns whole groups to folds, largest group first, each to the
/// currently smallest fold (lowest index on ties). Groups are ordered by
/// size, then by first appearance.
pub fn grouped_split<S: AsRef<str>>(group_keys: &[S], folds: usize) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    let row_group: Vec<usize> = group_keys
        .iter()
        .map(|k| {
            let g = *group_of.entry(k.as_ref()).or_insert_with(|| {
                sizes.push(0);
                sizes.len() - 1
            });
            sizes[g] += 1;
            g
        })
        .collect();
    if sizes.len() < folds {
        return Err(Error::invalid(format!(
            "{} distinct groups cannot fill {folds} folds",
            sizes.len()
        )));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut load = vec![0usize; folds];
    let mut fold_of_group = vec![0; sizes.len()];
    for g in order {
        let f = (0..folds).min_by_key(|&f| (load[f], f)).expect("folds ≥ 2");
        fold_of_group[g] = f;
        load[f] += sizes[g];
    }
    Ok(row_group.into_iter().map(|g| fold_of_group[g]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub train_size: usize,
}

impl EvalReport {
    pub fn from_scores(method: impl Into<String>, fold_scores: Vec<f64>, train_size: usize) -> Self {
        let (mean, stderr) = mean_and_stderr(&fold_scores);
        EvalReport {
            method: method.into(),
            fold_scores,
            mean,
            stderr,
            train_size,
        }
    }
}

/// Splits rows into train/test index lists per fold.
pub fn fold_indices(assignment: &[usize], folds: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..assignment.len()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect()
}

/// Cross-validated ROC-AUC.
///
/// `fit_predict(train_rows, test_rows)` fits on the train rows only and
/// returns one score per test row. Folds are stratified, or grouped when
/// `groups` is given; folds run in parallel and are reported in order.
pub fn cross_validate_with<F>(
    method: &str,
    labels: &[bool],
    groups: Option<&[String]>,
    folds: usize,
    seed: u64,
    fit_predict: F,
) -> Result<EvalReport>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    let assignment = match groups {
        Some(g) => grouped_split(g, folds)?,
        None => stratified_folds(labels, folds, seed)?,
    };
    let splits = fold_indices(&assignment, folds);
    for (f, (train, test)) in splits.iter().enumerate() {
        for (name, rows) in [("train", train), ("test", test)] {
            let pos = rows.iter().filter(|&&i| labels[i]).count();
            if pos == 0 || pos == rows.len() {
                return Err(Error::SingleClass(format!("fold {f} {name} split has a single class")));
            }
        }
    }
    let scores: Vec<f64> = splits
        .par_iter()
        .map(|(train, test)| {
            let preds = fit_predict(train, test)?;
            if preds.len() != test.len() {
                return Err(Error::DimensionMismatch {
                    expected: test.len(),
                    found: preds.len(),
                });
            }
            let y: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
            roc_auc(&preds, &y)
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_scores(method, scores, labels.len()))
}
