//! L2-regularized logistic regression fitted by damped Newton iterations.
//!
//! Minimizes `(1/n) Σ [softplus(z_i) − y_i z_i] + (l2/2) ‖w‖²` with
//! `z = w·x + b`; the intercept is not penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_binary_inputs, sigmoid, softplus};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::persist::Persist;

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl Persist for LogRegModel {
    const KIND: &'static str = "logreg";
}

/// Regularized mean loss of `(coef, intercept)` on `(x, y)`.
pub fn logreg_objective(x: &FeatureMatrix, y: &[bool], l2: f64, coef: &[f64], intercept: f64) -> f64 {
    let n = y.len() as f64;
    let data: f64 = x
        .rows()
        .zip(y)
        .map(|(row, &yi)| {
            let z = intercept + row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
            softplus(z) - if yi { z } else { 0.0 }
        })
        .sum();
    data / n + 0.5 * l2 * coef.iter().map(|c| c * c).sum::<f64>()
}

pub fn logreg_fit(x: &FeatureMatrix, y: &[bool], l2: f64) -> Result<LogRegModel> {
    logreg_fit_with_cap(x, y, l2, MAX_ITERATIONS)
}

pub fn logreg_fit_with_cap(x: &FeatureMatrix, y: &[bool], l2: f64, max_iterations: usize) -> Result<LogRegModel> {
    check_binary_inputs(x, y)?;
    if !(l2 >= 0.0) {
        return Err(Error::invalid("l2 must be non-negative"));
    }
    let (n, d) = (y.len(), x.n_cols());
    let inv_n = 1.0 / n as f64;
    // Design matrix with a trailing column of ones for the intercept.
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x.get(i, j) } else { 1.0 });
    let targets = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let objective = |theta: &DVector<f64>| {
        logreg_objective(x, y, l2, &theta.as_slice()[..d], theta[d])
    };

    let mut theta = DVector::<f64>::zeros(d + 1);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..max_iterations {
        let z = &design * &theta;
        let p = z.map(sigmoid);
        let mut grad = design.tr_mul(&(&p - &targets)) * inv_n;
        for j in 0..d {
            grad[j] += l2 * theta[j];
        }
        grad_norm = grad.norm();
        if grad_norm <= GRADIENT_TOLERANCE {
            return Ok(LogRegModel {
                coef: theta.as_slice()[..d].to_vec(),
                intercept: theta[d],
            });
        }
        let weights = p.map(|v| v * (1.0 - v) * inv_n);
        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        let mut hessian = design.tr_mul(&weighted);
        for j in 0..d {
            hessian[(j, j)] += l2;
        }
        let step = solve_spd(hessian, &grad)?;

        // Backtracking keeps each iteration a descent step.
        let current = objective(&theta);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &theta - &step * t;
            if objective(&candidate) <= current - 1e-4 * t * slope || t < 1e-10 {
                theta = candidate;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        grad_norm,
    })
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let k = h.nrows();
    let mut jitter = 0.0;
    for _ in 0..8 {
        if let Some(chol) = h.clone().cholesky() {
            return Ok(chol.solve(g));
        }
        // Flat directions (e.g. an unpenalized intercept on separable data).
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
        for j in 0..k {
            h[(j, j)] += jitter;
        }
    }
    Err(Error::invalid("logistic regression Hessian is not positive definite"))
}

impl LogRegModel {
    pub fn decision_function(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.coef.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coef.len(),
                found: x.n_cols(),
            });
        }
        Ok(x
            .rows()
            .map(|row| self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.decision_function(x)?.into_iter().map(sigmoid).collect())
    }
}

pub fn logreg_predict_proba(model: &LogRegModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let d = rows[0].len();
        FeatureMatrix::from_rows(rows, (0..d).map(|j| format!("x{j}")).collect()).unwrap()
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let x = matrix(vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0], vec![-0.5], vec![0.5]]);
        let y = [false, false, true, true, true, false];
        let m = logreg_fit(&x, &y, 0.01).unwrap();
        assert!(m.intercept.abs() < 1e-6, "{}", m.intercept);
        assert!(m.coef[0] > 0.0);
    }

    #[test]
    fn matches_grid_search_oracle() {
        let x = matrix(vec![vec![-1.5], vec![-0.5], vec![0.7], vec![2.0]]);
        let y = [false, false, true, true];
        let l2 = 0.1;
        let m = logreg_fit(&x, &y, l2).unwrap();
        let fitted = logreg_objective(&x, &y, l2, &m.coef, m.intercept);

        let mut grid_min = f64::INFINITY;
        for wi in 0..=800 {
            for bi in 0..=400 {
                let w = wi as f64 * 0.01;
                let b = -2.0 + bi as f64 * 0.01;
                grid_min = grid_min.min(logreg_objective(&x, &y, l2, &[w], b));
            }
        }
        assert!(fitted <= grid_min + 1e-12);
        assert!((fitted - grid_min).abs() < 1e-3, "{fitted} vs {grid_min}");
    }

    #[test]
    fn stronger_penalty_shrinks_coefficients() {
        let x = matrix((0..30).map(|i| vec![i as f64 / 10.0, ((i * 7) % 11) as f64 / 5.0]).collect());
        let y: Vec<bool> = (0..30).map(|i| (i * 13) % 30 > 12).collect();
        let norms: Vec<f64> = [0.001, 0.01, 0.1, 1.0]
            .iter()
            .map(|&l2| {
                let m = logreg_fit(&x, &y, l2).unwrap();
                m.coef.iter().map(|c| c * c).sum::<f64>().sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x = matrix(vec![vec![-1.0], vec![0.3], vec![1.0], vec![-0.2]]);
        let err = logreg_fit_with_cap(&x, &[false, true, true, true], 0.01, 1).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }), "{err}");
    }
}
