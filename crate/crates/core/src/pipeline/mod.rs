//! End-to-end orchestration: column routing, cross-validated analytics
//! benchmarks and join benchmarks with JSON reports.

mod analytics;
mod bench;
mod join_bench;
mod report;
mod vectorize;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use analytics::{
    column_gains, cross_validate, predict_method, prepare_dataset, run_analytics_benchmark, AnalyticsMethod, ColumnGain, DatasetSpec,
    Setting,
};
pub use bench::{run_bench, BenchConfig, BenchOutcome, BenchTask};
pub use join_bench::{run_join_benchmark, JoinPair, JoinPairSpec};
pub use report::{BenchmarkReport, Cell, Gain, RankEntry};
pub use vectorize::{vectorize_table, ColumnPlan, Encoding, Vectorizer};

use crate::embed::BackendConfig;
use crate::encoders::{MinHashParams, TfidfParams};
use crate::error::{Error, Result};
use crate::learn::{GbdtParams, DEFAULT_FOLDS};
use crate::pca::DEFAULT_COMPONENTS;
use crate::profile::{ProfileParams, DEFAULT_REGIME_THRESHOLD, DEFAULT_SAMPLE_SIZE};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// How high-cardinality text columns are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextPolicy {
    /// Profile the column: dirty → MinHash, diverse → embedding.
    Auto,
    #[serde(rename = "minhash")]
    ForceMinHash,
    #[serde(rename = "tfidf")]
    ForceTfidf,
    #[serde(rename = "embedding")]
    ForceEmbedding,
}

impl std::str::FromStr for TextPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(TextPolicy::Auto),
            "minhash" => Ok(TextPolicy::ForceMinHash),
            "tfidf" | "tf-idf" => Ok(TextPolicy::ForceTfidf),
            "embedding" | "embeddings" => Ok(TextPolicy::ForceEmbedding),
            other => Err(Error::invalid(format!("unknown text encoder policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub regime_threshold: usize,
    pub profile_sample_size: usize,
    pub pca_dim: usize,
    /// Reduce embedding blocks with PCA (raw vectors otherwise).
    pub embedding_pca: bool,
    pub minhash: MinHashParams,
    pub tfidf: TfidfParams,
    pub text_encoder_policy: TextPolicy,
    /// Per-column policy overriding the routing of any string column.
    pub column_overrides: BTreeMap<String, TextPolicy>,
    pub backend: BackendConfig,
    pub learner: GbdtParams,
    pub folds: usize,
    pub seed: u64,
    pub train_sizes: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            regime_threshold: DEFAULT_REGIME_THRESHOLD,
            profile_sample_size: DEFAULT_SAMPLE_SIZE,
            pca_dim: DEFAULT_COMPONENTS,
            embedding_pca: true,
            minhash: MinHashParams::default(),
            tfidf: TfidfParams::default(),
            text_encoder_policy: TextPolicy::Auto,
            column_overrides: BTreeMap::new(),
            backend: BackendConfig::default(),
            learner: GbdtParams::default(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            train_sizes: vec![1000],
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: CONFIG_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        if self.pca_dim == 0 || self.minhash.dim == 0 {
            return Err(Error::invalid("pca_dim and minhash.dim must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("folds must be at least 2"));
        }
        if self.learner.n_trees == 0 || !(self.learner.learning_rate > 0.0 && self.learner.learning_rate <= 1.0) {
            return Err(Error::invalid("learner needs n_trees ≥ 1 and 0 < learning_rate ≤ 1"));
        }
        if self.train_sizes.iter().any(|&s| s < 2 * self.folds) {
            return Err(Error::invalid("every train size must allow two rows per fold"));
        }
        Ok(())
    }

    pub fn profile_params(&self) -> ProfileParams {
        ProfileParams {
            sample_size: self.profile_sample_size,
            threshold: self.regime_threshold,
            ..ProfileParams::default()
        }
    }
}

/// Relative ROC-AUC gain in percent.
pub fn roc_auc_gain(method_auc: f64, baseline_auc: f64) -> Result<f64> {
    if baseline_auc <= 0.0 {
        return Err(Error::invalid("baseline score must be positive"));
    }
    Ok(100.0 * (method_auc - baseline_auc) / baseline_auc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert_eq!(roc_auc_gain(0.8, 0.8).unwrap(), 0.0);
        assert!((roc_auc_gain(0.84, 0.80).unwrap() - 5.0).abs() < 1e-12);
        assert!(roc_auc_gain(0.7, 0.8).unwrap() < 0.0 && roc_auc_gain(0.8, 0.7).unwrap() > 0.0);
        assert!(roc_auc_gain(0.5, 0.0).is_err());
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let c = PipelineConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c.regime_threshold, 3000);
        assert_eq!(c.pca_dim, 30);
        assert_eq!(c.folds, 7);
        assert_eq!(c.text_encoder_policy, TextPolicy::Auto);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&json).unwrap(), c);
        assert!(PipelineConfig::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"folds": 1}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn policy_names() {
        assert_eq!("minhash".parse::<TextPolicy>().unwrap(), TextPolicy::ForceMinHash);
        let p: TextPolicy = serde_json::from_str("\"embedding\"").unwrap();
        assert_eq!(p, TextPolicy::ForceEmbedding);
        assert!("bert".parse::<TextPolicy>().is_err());
    }
}
