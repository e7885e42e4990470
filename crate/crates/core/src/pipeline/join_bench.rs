use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{mean_rank_entries, BenchmarkReport, Cell, Gain};
use super::{roc_auc_gain, PipelineConfig};
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::join::{load_gold, sweep_thresholds, JoinEncoder, JoinSpec, SweepResult};
use crate::table::{load_csv, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinPairSpec {
    pub name: String,
    pub left: PathBuf,
    pub right: PathBuf,
    pub left_key: String,
    pub right_key: String,
    /// CSV of `right_id,left_id` row indices.
    pub gold: PathBuf,
}

/// A loaded benchmark pair.
#[derive(Debug, Clone)]
pub struct JoinPair {
    pub name: String,
    pub left: Table,
    pub right: Table,
    pub left_key: String,
    pub right_key: String,
    pub gold: Vec<Option<usize>>,
}

impl JoinPairSpec {
    pub fn load(&self, base_dir: &Path) -> Result<JoinPair> {
        let left = load_csv(base_dir.join(&self.left), b',', true)?;
        let right = load_csv(base_dir.join(&self.right), b',', true)?;
        let gold = load_gold(base_dir.join(&self.gold), right.n_rows(), left.n_rows())?;
        Ok(JoinPair {
            name: self.name.clone(),
            left,
            right,
            left_key: self.left_key.clone(),
            right_key: self.right_key.clone(),
            gold,
        })
    }
}

fn encoder_name(e: JoinEncoder) -> &'static str {
    match e {
        JoinEncoder::Tfidf => "tfidf",
        JoinEncoder::MinHash => "minhash",
        JoinEncoder::Embedding => "embedding",
    }
}

/// Best F1 over the threshold sweep for every (pair, method), gains
/// against `baseline` and mean ranks over pairs. A pair whose baseline F1
/// is zero gets no gain entries.
pub fn run_join_benchmark(
    pairs: &[JoinPair],
    methods: &[JoinEncoder],
    baseline: Option<JoinEncoder>,
    taus: &[f64],
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
) -> Result<BenchmarkReport> {
    if methods.is_empty() {
        return Err(Error::invalid("join benchmark needs at least one method"));
    }
    if let Some(b) = baseline {
        if !methods.contains(&b) {
            return Err(Error::invalid(format!("baseline {} is not among the methods", encoder_name(b))));
        }
    }
    let jobs: Vec<(usize, JoinEncoder)> = (0..pairs.len())
        .flat_map(|p| methods.iter().map(move |&m| (p, m)))
        .collect();
    let sweeps: Vec<SweepResult> = jobs
        .par_iter()
        .map(|&(p, encoder)| {
            let pair = &pairs[p];
            let spec = JoinSpec {
                tfidf: config.tfidf,
                minhash: config.minhash,
                ..JoinSpec::new(&pair.left_key, &pair.right_key, encoder, taus[0])
            };
            sweep_thresholds(&pair.right, &pair.left, &spec, taus, &pair.gold, embedder)
        })
        .collect::<Result<_>>()?;

    let mut report = BenchmarkReport::new("join");
    let names: Vec<String> = methods.iter().map(|&m| encoder_name(m).to_string()).collect();
    let mut warnings = Vec::new();
    let mut rank_tasks = Vec::new();
    for (p, pair) in pairs.iter().enumerate() {
        let row = &sweeps[p * methods.len()..(p + 1) * methods.len()];
        for (name, sweep) in names.iter().zip(row) {
            report.cells.push(Cell {
                dataset: pair.name.clone(),
                setting: None,
                method: name.clone(),
                train_size: None,
                n_rows: Some(pair.right.n_rows()),
                metric: "f1".to_string(),
                mean: sweep.best_f1,
                stderr: None,
                fold_scores: Vec::new(),
                threshold: Some(sweep.best_tau),
            });
        }
        if let Some(b) = baseline {
            let base_f1 = row[methods.iter().position(|&m| m == b).expect("checked above")].best_f1;
            if base_f1 > 0.0 {
                for (name, sweep) in names.iter().zip(row) {
                    report.gains.push(Gain {
                        dataset: pair.name.clone(),
                        setting: None,
                        train_size: None,
                        method: name.clone(),
                        baseline: encoder_name(b).to_string(),
                        gain_percent: roc_auc_gain(sweep.best_f1, base_f1)?,
                    });
                }
            } else {
                warnings.push(format!("{}: baseline F1 is zero, no gains reported", pair.name));
            }
        }
        rank_tasks.push((None, row.iter().map(|s| s.best_f1).collect()));
    }
    report.mean_ranks = mean_rank_entries(&names, &rank_tasks)?;
    report.metadata.insert("thresholds".into(), serde_json::to_value(taus)?);
    report.metadata.insert("warnings".into(), serde_json::to_value(warnings)?);
    Ok(report)
}
