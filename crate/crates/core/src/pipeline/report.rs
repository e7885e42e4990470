use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One (dataset, method, train size) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub setting: Option<String>,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_size: Option<usize>,
    /// Rows actually evaluated, after clamping and balancing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_rows: Option<usize>,
    pub metric: String,
    pub mean: f64,
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fold_scores: Vec<f64>,
    /// Best similarity threshold, for join cells.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub setting: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_size: Option<usize>,
    pub method: String,
    pub baseline: String,
    pub gain_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    /// `None` for the pooled ranking over every train size.
    pub train_size: Option<usize>,
    pub method: String,
    pub mean_rank: f64,
    pub n_tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub task: String,
    pub cells: Vec<Cell>,
    pub gains: Vec<Gain>,
    pub mean_ranks: Vec<RankEntry>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl BenchmarkReport {
    pub fn new(task: &str) -> Self {
        BenchmarkReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config_digest: String::new(),
            task: task.to_string(),
            cells: Vec::new(),
            gains: Vec::new(),
            mean_ranks: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: BenchmarkReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: REPORT_SCHEMA_VERSION,
                found: report.schema_version,
            });
        }
        Ok(report)
    }

    /// Mean rank of `method` in the pooled ranking.
    pub fn pooled_rank(&self, method: &str) -> Option<f64> {
        self.mean_ranks
            .iter()
            .find(|r| r.train_size.is_none() && r.method == method)
            .map(|r| r.mean_rank)
    }

    pub fn cell(&self, dataset: &str, setting: Option<&str>, method: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.setting.as_deref() == setting && c.method == method)
    }

    /// Plot data: one row per cell.
    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "setting", "method", "train_size", "metric", "mean", "stderr", "threshold"])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.dataset.clone(),
                opt(c.setting.clone()),
                c.method.clone(),
                opt(c.train_size.map(|v| v.to_string())),
                c.metric.clone(),
                c.mean.to_string(),
                opt(c.stderr.map(|v| v.to_string())),
                opt(c.threshold.map(|v| v.to_string())),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report writer>", e))?;
        Ok(())
    }
}

/// Mean ranks per train size plus the pooled ranking over every task.
/// Each task is `(train_size, one score per method)`.
pub(crate) fn mean_rank_entries(methods: &[String], tasks: &[(Option<usize>, Vec<f64>)]) -> Result<Vec<RankEntry>> {
    if tasks.is_empty() {
        return Ok(Vec::new());
    }
    let entries = |size: Option<usize>, group: Vec<&Vec<f64>>| -> Result<Vec<RankEntry>> {
        let by_method: Vec<Vec<f64>> = (0..methods.len()).map(|m| group.iter().map(|t| t[m]).collect()).collect();
        let ranks = crate::learn::mean_rank(&by_method)?;
        Ok(methods
            .iter()
            .zip(ranks)
            .map(|(method, mean_rank)| RankEntry {
                train_size: size,
                method: method.clone(),
                mean_rank,
                n_tasks: group.len(),
            })
            .collect())
    };
    let mut sizes: Vec<usize> = tasks.iter().filter_map(|t| t.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out = Vec::new();
    for size in sizes {
        out.extend(entries(Some(size), tasks.iter().filter(|t| t.0 == Some(size)).map(|t| &t.1).collect())?);
    }
    out.extend(entries(None, tasks.iter().map(|t| &t.1).collect())?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = BenchmarkReport::new("join");
        r.cells.push(Cell {
            dataset: "d".into(),
            setting: None,
            method: "tfidf".into(),
            train_size: None,
            n_rows: None,
            metric: "f1".into(),
            mean: 0.75,
            stderr: None,
            fold_scores: vec![],
            threshold: Some(0.5),
        });
        let json = r.to_json().unwrap();
        assert!(!json.contains("setting"));
        assert_eq!(BenchmarkReport::from_json(&json).unwrap(), r);
        let mut csv = Vec::new();
        r.write_cells_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap().lines().nth(1).unwrap(),
            "d,,tfidf,,f1,0.75,,0.5"
        );
    }
}
