//! Downstream learners and evaluation statistics.

mod cv;
mod ensemble;
mod gbdt;
mod logreg;
mod metrics;

pub use cv::{
    cross_validate_with, fold_indices, grouped_split, stratified_folds, EvalReport, DEFAULT_FOLDS,
};
pub use ensemble::{out_of_fold, stacking_ensemble, voting_ensemble, STACKING_FOLDS};
pub use gbdt::{gbdt_fit, gbdt_predict_proba, GbdtModel, GbdtParams, Node, Tree};
pub use logreg::{
    logreg_fit, logreg_fit_with_cap, logreg_objective, logreg_predict_proba, LogRegModel, GRADIENT_TOLERANCE,
};
pub use metrics::{average_ranks, mean_and_stderr, mean_rank, roc_auc};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss of raw scores against 0/1 targets.
pub(crate) fn log_loss(targets: &[f64], scores: &[f64]) -> f64 {
    targets
        .iter()
        .zip(scores)
        .map(|(y, z)| softplus(*z) - y * z)
        .sum::<f64>()
        / targets.len() as f64
}

pub(crate) fn check_binary_inputs(x: &FeatureMatrix, y: &[bool]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: x.n_rows(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("no training rows"));
    }
    if !x.is_finite() {
        return Err(Error::invalid("training matrix contains non-finite values"));
    }
    Ok(())
}
