//! Principal component analysis by thin SVD of the centered data.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseMatrix};
use crate::persist::Persist;

pub const DEFAULT_COMPONENTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Principal axes, one orthonormal row per component.
    components: Vec<Vec<f64>>,
    /// Sample variance (n − 1 denominator) along each axis, non-increasing.
    explained_variance: Vec<f64>,
    total_variance: f64,
}

impl Persist for PcaModel {
    const KIND: &'static str = "pca";
}

impl PcaModel {
    /// Fits `k` components, clamped to `min(k, n − 1, d)`.
    ///
    /// Each axis is oriented so that its largest-magnitude loading is
    /// positive, which makes the fit independent of row order and of the
    /// SVD's sign choices.
    pub fn fit(x: &FeatureMatrix, k: usize) -> Result<Self> {
        let (n, d) = (x.n_rows(), x.n_cols());
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two rows"));
        }
        if k == 0 || d == 0 {
            return Err(Error::invalid("PCA needs k ≥ 1 and at least one column"));
        }
        if !x.is_finite() {
            return Err(Error::invalid("PCA input contains non-finite values"));
        }
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centered = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
        let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;

        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let k = k.min(n - 1).min(d);
        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let mut axis: Vec<f64> = v_t.row(c).iter().copied().collect();
            orient(&mut axis);
            let s = svd.singular_values[c];
            components.push(axis);
            explained_variance.push(s * s / (n - 1) as f64);
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// Projects `(x − mean)` onto the principal axes.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        let names = (0..self.n_components()).map(|j| format!("pc_{j}")).collect();
        let mut out = FeatureMatrix::zeros(x.n_rows(), names);
        let mut centered = vec![0.0; self.input_dim()];
        for i in 0..x.n_rows() {
            for ((c, v), m) in centered.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - m;
            }
            for (dst, axis) in out.row_mut(i).iter_mut().zip(&self.components) {
                *dst = axis.iter().zip(&centered).map(|(a, c)| a * c).sum();
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &FeatureMatrix) -> Result<FeatureMatrix> {
        if z.n_cols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                found: z.n_cols(),
            });
        }
        let names = (0..self.input_dim()).map(|j| format!("x_{j}")).collect();
        let mut out = FeatureMatrix::zeros(z.n_rows(), names);
        for i in 0..z.n_rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (score, axis) in z.row(i).iter().zip(&self.components) {
                for (r, a) in row.iter_mut().zip(axis) {
                    *r += score * a;
                }
            }
        }
        Ok(out)
    }
    /// Fits on sparse rows without densifying the `n × d` matrix: the top
    /// eigenvectors of the centered `n × n` Gram matrix are mapped back to
    /// input space. Suited to wide inputs such as TF-IDF blocks. Axes with
    /// numerically zero variance are left as zero vectors.
    pub fn fit_sparse(x: &SparseMatrix, k: usize) -> Result<Self> {
        let (n, d) = (x.n_rows(), x.n_cols());
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two rows"));
        }
        if k == 0 || d == 0 {
            return Err(Error::invalid("PCA needs k ≥ 1 and at least one column"));
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            let (idx, vals) = x.row(i);
            for (&j, v) in idx.iter().zip(vals) {
                mean[j] += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mean_sq: f64 = mean.iter().map(|m| m * m).sum();
        let row_dot_mean: Vec<f64> = (0..n).map(|i| sparse_dense_dot(x, i, &mean)).collect();

        let gram_rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| sparse_dot(x, i, j)).collect())
            .collect();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            gram_rows[i][j] - row_dot_mean[i] - row_dot_mean[j] + mean_sq
        });
        let total_variance = gram.trace() / (n - 1) as f64;

        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);

        let k = k.min(n - 1).min(d);
        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let lambda = eig.eigenvalues[c].max(0.0);
            let u = eig.eigenvectors.column(c);
            let mut axis = vec![0.0; d];
            if lambda > top * 1e-12 && lambda > 0.0 {
                let u_sum: f64 = u.iter().sum();
                for i in 0..n {
                    let (idx, vals) = x.row(i);
                    for (&j, v) in idx.iter().zip(vals) {
                        axis[j] += v * u[i];
                    }
                }
                let s = lambda.sqrt();
                for (a, m) in axis.iter_mut().zip(&mean) {
                    *a = (*a - m * u_sum) / s;
                }
                orient(&mut axis);
            }
            components.push(axis);
            explained_variance.push(lambda / (n - 1) as f64);
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn transform_sparse(&self, x: &SparseMatrix) -> Result<FeatureMatrix> {
        if x.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        let offsets: Vec<f64> = self
            .components
            .iter()
            .map(|a| a.iter().zip(&self.mean).map(|(a, m)| a * m).sum())
            .collect();
        let names = (0..self.n_components()).map(|j| format!("pc_{j}")).collect();
        let mut out = FeatureMatrix::zeros(x.n_rows(), names);
        for i in 0..x.n_rows() {
            for ((dst, axis), off) in out.row_mut(i).iter_mut().zip(&self.components).zip(&offsets) {
                *dst = sparse_dense_dot(x, i, axis) - off;
            }
        }
        Ok(out)
    }
}

/// Flips `axis` so that its largest-magnitude entry is positive.
fn orient(axis: &mut [f64]) {
    let pivot = axis
        .iter()
        .enumerate()
        .fold(0, |best, (j, v)| if v.abs() > axis[best].abs() { j } else { best });
    if axis[pivot] < 0.0 {
        axis.iter_mut().for_each(|v| *v = -*v);
    }
}

fn sparse_dense_dot(x: &SparseMatrix, i: usize, dense: &[f64]) -> f64 {
    let (idx, vals) = x.row(i);
    idx.iter().zip(vals).map(|(&j, v)| v * dense[j]).sum()
}

fn sparse_dot(x: &SparseMatrix, a: usize, b: usize) -> f64 {
    let (ia, va) = x.row(a);
    let (ib, vb) = x.row(b);
    let (mut p, mut q, mut acc) = (0, 0, 0.0);
    while p < ia.len() && q < ib.len() {
        match ia[p].cmp(&ib[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc += va[p] * vb[q];
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

pub fn pca_fit(x: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    PcaModel::fit(x, k)
}

pub fn pca_transform(model: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    model.transform(x)
}
