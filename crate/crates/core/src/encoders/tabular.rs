//! One-hot, datetime, imputation and scaling encoders for the non-text
//! columns.

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::persist::Persist;
use crate::table::{parse_datetime, parse_number};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    categories: Vec<String>,
}

impl Persist for OneHotEncoder {
    const KIND: &'static str = "onehot";
}

impl OneHotEncoder {
    /// Categories are kept in order of first appearance.
    pub fn fit<S: AsRef<str>>(train: &[S]) -> Self {
        let mut categories: Vec<String> = Vec::new();
        for v in train {
            let v = v.as_ref();
            if !categories.iter().any(|c| c == v) {
                categories.push(v.to_string());
            }
        }
        OneHotEncoder { categories }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn transform<S: AsRef<str>>(&self, values: &[S]) -> FeatureMatrix {
        let names = self.categories.iter().map(|c| format!("onehot_{c}")).collect();
        let mut out = FeatureMatrix::zeros(values.len(), names);
        for (i, v) in values.iter().enumerate() {
            if let Some(j) = self.categories.iter().position(|c| c == v.as_ref()) {
                out.set(i, j, 1.0);
            }
        }
        out
    }
}

pub fn onehot_encode<S: AsRef<str>>(train: &[S], apply: &[S]) -> FeatureMatrix {
    OneHotEncoder::fit(train).transform(apply)
}

pub const DATETIME_FEATURES: [&str; 5] = ["year", "month", "day", "weekday", "hour"];

/// Expands timestamps into year, month, day, weekday (Monday = 0) and hour.
/// Unparseable cells become rows of `NaN` for downstream imputation.
pub fn datetime_encode<S: AsRef<str>>(values: &[S]) -> FeatureMatrix {
    let names = DATETIME_FEATURES.iter().map(|s| s.to_string()).collect();
    let mut out = FeatureMatrix::zeros(values.len(), names);
    for (i, v) in values.iter().enumerate() {
        let row = out.row_mut(i);
        match parse_datetime(v.as_ref()) {
            Some(dt) => {
                row.copy_from_slice(&[
                    dt.year() as f64,
                    dt.month() as f64,
                    dt.day() as f64,
                    dt.weekday().num_days_from_monday() as f64,
                    dt.hour() as f64,
                ]);
            }
            None => row.fill(f64::NAN),
        }
    }
    out
}

/// Parses a numeric column; unparseable or empty cells become `NaN`.
pub fn numeric_encode<S: AsRef<str>>(values: &[S]) -> FeatureMatrix {
    let data = values
        .iter()
        .map(|v| parse_number(v.as_ref()).unwrap_or(f64::NAN))
        .collect();
    FeatureMatrix::new(values.len(), data, vec!["value".to_string()]).expect("one column")
}

/// Replaces `NaN` with the per-column mean of the fit matrix (zero when a
/// column has no observed value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    means: Vec<f64>,
}

impl Persist for MeanImputer {
    const KIND: &'static str = "mean_imputer";
}

impl MeanImputer {
    pub fn fit(train: &FeatureMatrix) -> Self {
        let means = (0..train.n_cols())
            .map(|j| {
                let (sum, n) = train
                    .rows()
                    .map(|r| r[j])
                    .filter(|v| !v.is_nan())
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect();
        MeanImputer { means }
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_width(self.means.len(), m)?;
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for (v, &mean) in out.row_mut(i).iter_mut().zip(&self.means) {
                if v.is_nan() {
                    *v = mean;
                }
            }
        }
        Ok(out)
    }
}

/// Per-column centering and scaling by the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Persist for StandardScaler {
    const KIND: &'static str = "standard_scaler";
}

impl StandardScaler {
    pub fn fit(train: &FeatureMatrix) -> Self {
        let n = train.n_rows().max(1) as f64;
        let mut mean = vec![0.0; train.n_cols()];
        for row in train.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; train.n_cols()];
        for row in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        StandardScaler { mean, std }
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_width(self.mean.len(), m)?;
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for ((v, mu), sd) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                // Constant columns (up to rounding) carry no signal.
                *v = if *sd > 1e-12 * mu.abs().max(1.0) { (*v - mu) / sd } else { 0.0 };
            }
        }
        Ok(out)
    }
}

pub fn standardize(train: &FeatureMatrix, apply: &FeatureMatrix) -> Result<FeatureMatrix> {
    StandardScaler::fit(train).transform(apply)
}

fn check_width(expected: usize, m: &FeatureMatrix) -> Result<()> {
    if m.n_cols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: m.n_cols(),
        });
    }
    Ok(())
}
