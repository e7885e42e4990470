//! Dense and sparse row-major feature matrices.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix with one provenance name per column.
///
/// Encoders may emit `NaN` as a missing marker; [`MeanImputer`] replaces
/// them before the matrix reaches a learner.
///
/// [`MeanImputer`]: crate::encoders::MeanImputer
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    col_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, values: Vec<f64>, col_names: Vec<String>) -> Result<Self> {
        let n_cols = col_names.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: values.len(),
            });
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            values,
            col_names,
        })
    }

    pub fn zeros(n_rows: usize, col_names: Vec<String>) -> Self {
        let n_cols = col_names.len();
        FeatureMatrix {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
            col_names,
        }
    }

    /// Builds a matrix from rows that must all have `col_names.len()` entries.
    pub fn from_rows(rows: Vec<Vec<f64>>, col_names: Vec<String>) -> Result<Self> {
        let n_cols = col_names.len();
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        FeatureMatrix::new(n_rows, values, col_names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn with_prefix(mut self, prefix: &str) -> Self {
        for name in &mut self.col_names {
            *name = format!("{prefix}__{name}");
        }
        self
    }

    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            col_names: self.col_names.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            values.extend(cols.iter().map(|&j| row[j]));
        }
        FeatureMatrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            values,
            col_names: cols.iter().map(|&j| self.col_names[j].clone()).collect(),
        }
    }

    /// Horizontal concatenation. `n_rows` is only consulted when `blocks` is
    /// empty.
    pub fn hconcat(n_rows: usize, blocks: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let n_rows = blocks.first().map_or(n_rows, |b| b.n_rows);
        if let Some(bad) = blocks.iter().find(|b| b.n_rows != n_rows) {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                found: bad.n_rows,
            });
        }
        let col_names: Vec<String> = blocks.iter().flat_map(|b| b.col_names.iter().cloned()).collect();
        let mut values = Vec::with_capacity(n_rows * col_names.len());
        for i in 0..n_rows {
            for b in blocks {
                values.extend_from_slice(b.row(i));
            }
        }
        FeatureMatrix::new(n_rows, values, col_names)
    }

    /// L2-normalizes every row in place; all-zero rows stay zero.
    pub fn normalize_rows(&mut self) {
        let n_cols = self.n_cols;
        if n_cols == 0 {
            return;
        }
        for row in self.values.chunks_mut(n_cols) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.col_names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<matrix writer>", e))?;
        Ok(())
    }
}

/// Compressed sparse row matrix. Column indices within a row are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs sorted by column.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in entries {
            debug_assert!(j < self.n_cols);
            debug_assert!(self.indices.len() == *self.indptr.last().unwrap() || self.indices.last() < Some(&j));
            self.indices.push(j);
            self.data.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, prefix: &str) -> FeatureMatrix {
        let names = (0..self.n_cols).map(|j| format!("{prefix}{j}")).collect();
        let mut m = FeatureMatrix::zeros(self.n_rows(), names);
        for i in 0..self.n_rows() {
            let (idx, vals) = self.row(i);
            let row = m.row_mut(i);
            for (&j, &v) in idx.iter().zip(vals) {
                row[j] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn hconcat_interleaves_rows() {
        let a = FeatureMatrix::from_rows(vec![vec![1.0], vec![2.0]], names(1)).unwrap();
        let b = FeatureMatrix::from_rows(vec![vec![3.0, 4.0], vec![5.0, 6.0]], names(2)).unwrap();
        let c = FeatureMatrix::hconcat(2, &[a, b]).unwrap();
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(c.n_cols(), 3);
        assert_eq!(FeatureMatrix::hconcat(4, &[]).unwrap().n_rows(), 4);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FeatureMatrix::new(2, vec![1.0; 3], names(2)).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]], names(1)).is_err());
    }

    #[test]
    fn sparse_to_dense() {
        let mut s = SparseMatrix::new(3);
        s.push_row([(0, 1.0), (2, 2.0)]);
        s.push_row([]);
        let d = s.to_dense("t");
        assert_eq!(d.row(0), &[1.0, 0.0, 2.0]);
        assert_eq!(d.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(s.nnz(), 2);
    }
}
