//! Soft voting and stacking over per-model positive-class probabilities.

use super::cv::{fold_indices, stratified_folds};
use super::logreg::logreg_fit;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Internal folds used to produce out-of-fold base predictions for stacking.
pub const STACKING_FOLDS: usize = 5;

pub fn voting_ensemble(prob_lists: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = prob_lists
        .first()
        .ok_or_else(|| Error::invalid("voting over zero models"))?;
    if let Some(bad) = prob_lists.iter().find(|p| p.len() != first.len()) {
        return Err(Error::DimensionMismatch {
            expected: first.len(),
            found: bad.len(),
        });
    }
    let m = prob_lists.len() as f64;
    Ok((0..first.len())
        .map(|i| prob_lists.iter().map(|p| p[i]).sum::<f64>() / m)
        .collect())
}

fn stack_matrix(members: &[Vec<f64>]) -> Result<FeatureMatrix> {
    let n = members.first().map_or(0, Vec::len);
    let names = (0..members.len()).map(|j| format!("base_{j}")).collect();
    let mut m = FeatureMatrix::zeros(n, names);
    for (j, probs) in members.iter().enumerate() {
        if probs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: probs.len(),
            });
        }
        for (i, &p) in probs.iter().enumerate() {
            m.set(i, j, p);
        }
    }
    Ok(m)
}

/// Logistic regression over the base models' probabilities.
///
/// `base_probs_train[m]` must hold out-of-fold predictions of model `m` on
/// the training rows (see [`out_of_fold`]); the meta-model is applied to
/// `base_probs_test`. The penalty is `1 / n_train`.
pub fn stacking_ensemble(
    base_probs_train: &[Vec<f64>],
    y_train: &[bool],
    base_probs_test: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if base_probs_train.is_empty() || base_probs_train.len() != base_probs_test.len() {
        return Err(Error::invalid("stacking needs the same non-empty set of base models for train and test"));
    }
    let train = stack_matrix(base_probs_train)?;
    let test = stack_matrix(base_probs_test)?;
    let meta = logreg_fit(&train, y_train, 1.0 / y_train.len() as f64)?;
    meta.predict_proba(&test)
}

/// Out-of-fold predictions over `STACKING_FOLDS` stratified folds:
/// `fit_predict(train_rows, test_rows)` must fit on the train rows only.
pub fn out_of_fold<F>(labels: &[bool], seed: u64, fit_predict: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>>,
{
    let assignment = stratified_folds(labels, STACKING_FOLDS, seed)?;
    let mut out = vec![f64::NAN; labels.len()];
    for (train, test) in fold_indices(&assignment, STACKING_FOLDS) {
        if test.is_empty() {
            continue;
        }
        let preds = fit_predict(&train, &test)?;
        for (&i, p) in test.iter().zip(preds) {
            out[i] = p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::roc_auc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn voting_hand_cases() {
        assert_eq!(voting_ensemble(&[vec![0.2], vec![0.6]]).unwrap(), vec![0.4]);
        let p = vec![0.1, 0.7, 0.33];
        assert_eq!(voting_ensemble(&[p.clone(), p.clone()]).unwrap(), p);
        let v = voting_ensemble(&[vec![0.1, 0.9], vec![0.4, 0.3], vec![0.7, 0.6]]).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] - 0.6).abs() < 1e-15);
        assert!(voting_ensemble(&[]).is_err());
        assert!(voting_ensemble(&[vec![0.1], vec![0.1, 0.2]]).is_err());
    }

    fn labels(n: usize) -> Vec<bool> {
        (0..n).map(|i| i % 2 == 0).collect()
    }

    #[test]
    fn perfect_base_model_dominates() {
        let y = labels(40);
        let perfect: Vec<f64> = y.iter().map(|&v| if v { 0.9 } else { 0.1 }).collect();
        let noise: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
        let out = stacking_ensemble(&[perfect.clone(), noise.clone()], &y, &[perfect, noise]).unwrap();
        assert_eq!(roc_auc(&out, &y).unwrap(), 1.0);
    }

    #[test]
    fn duplicated_base_keeps_ordering() {
        let y = labels(60);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base: Vec<f64> = y.iter().map(|&v| if v { 0.6 } else { 0.4 } + rng.random_range(-0.3..0.3)).collect();
        let test: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let out = stacking_ensemble(&[base.clone(), base], &y, &[test.clone(), test.clone()]).unwrap();
        for i in 0..test.len() {
            for j in 0..test.len() {
                if test[i] < test[j] {
                    assert!(out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn out_of_fold_covers_every_row() {
        let y = labels(23);
        let oof = out_of_fold(&y, 0, |train, test| {
            assert!(test.iter().all(|t| !train.contains(t)));
            Ok(test.iter().map(|&i| i as f64).collect())
        })
        .unwrap();
        assert_eq!(oof, (0..23).map(|i| i as f64).collect::<Vec<_>>());
    }
}
