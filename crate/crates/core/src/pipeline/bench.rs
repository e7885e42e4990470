use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analytics::{run_analytics_benchmark, AnalyticsMethod, DatasetSpec, Setting};
use super::join_bench::{run_join_benchmark, JoinPairSpec};
use super::report::BenchmarkReport;
use super::{PipelineConfig, CONFIG_SCHEMA_VERSION};
use crate::embed::{Embedder, StatsSnapshot};
use crate::error::{Error, Result};
use crate::join::{JoinEncoder, DEFAULT_THRESHOLDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchTask {
    Analytics,
    Join,
}

fn default_settings() -> Vec<Setting> {
    vec![Setting::TextNumeric, Setting::TextOnly]
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

/// A benchmark run described in JSON. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub schema_version: u32,
    pub task: BenchTask,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub pairs: Vec<JoinPairSpec>,
    pub methods: Vec<String>,
    /// Defaults to `minhash` for analytics and `tfidf` for joins.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default = "default_settings")]
    pub settings: Vec<Setting>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: BenchConfig = serde_json::from_str(text)?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: CONFIG_SCHEMA_VERSION,
                found: config.schema_version,
            });
        }
        config.pipeline.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BenchConfig::from_json(&text)
    }

    /// Hex SHA-256 of the config's canonical JSON.
    pub fn digest(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: BenchmarkReport,
    /// Exact bytes of the report file.
    pub json: String,
    /// Backend traffic of this run, when an embedder was needed.
    pub stats: Option<StatsSnapshot>,
}

fn resolve(base_dir: &Path, p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| base_dir.join(p))
}

pub fn run_bench(config: &BenchConfig, base_dir: &Path) -> Result<BenchOutcome> {
    let mut pipeline = config.pipeline.clone();
    pipeline.backend.path = resolve(base_dir, &pipeline.backend.path);
    pipeline.backend.cache_path = resolve(base_dir, &pipeline.backend.cache_path);

    let (mut report, embedder) = match config.task {
        BenchTask::Analytics => {
            let methods: Vec<AnalyticsMethod> = config.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
            let baseline = match &config.baseline {
                Some(b) => Some(b.parse::<AnalyticsMethod>()?),
                None => methods.iter().copied().find(|&m| m == AnalyticsMethod::MinHash),
            };
            let embedder = methods
                .iter()
                .any(|m| m.uses_embeddings())
                .then(|| Embedder::from_config(&pipeline.backend))
                .transpose()?;
            let datasets = config
                .datasets
                .iter()
                .map(|d| Ok((d.clone(), d.load(base_dir)?)))
                .collect::<Result<Vec<_>>>()?;
            let report = run_analytics_benchmark(
                &datasets,
                &methods,
                &config.settings,
                baseline,
                &pipeline,
                embedder.as_ref(),
            )?;
            (report, embedder)
        }
        BenchTask::Join => {
            let methods: Vec<JoinEncoder> = config.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
            let baseline = match &config.baseline {
                Some(b) => Some(b.parse::<JoinEncoder>()?),
                None => methods.iter().copied().find(|&m| m == JoinEncoder::Tfidf),
            };
            let embedder = methods
                .contains(&JoinEncoder::Embedding)
                .then(|| Embedder::from_config(&pipeline.backend))
                .transpose()?;
            let pairs = config
                .pairs
                .iter()
                .map(|p| p.load(base_dir))
                .collect::<Result<Vec<_>>>()?;
            let report = run_join_benchmark(
                &pairs,
                &methods,
                baseline,
                &config.thresholds,
                &pipeline,
                embedder.as_ref(),
            )?;
            (report, embedder)
        }
    };
    report.config_digest = config.digest()?;
    report.metadata.insert("seed".into(), config.pipeline.seed.into());
    if let Some(e) = &embedder {
        report.metadata.insert("embedding_model".into(), e.model_id().into());
    }
    let json = report.to_json()?;
    Ok(BenchOutcome {
        report,
        json,
        stats: embedder.map(|e| e.stats()),
    })
}
