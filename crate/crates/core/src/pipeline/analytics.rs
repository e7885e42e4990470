use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{mean_rank_entries, BenchmarkReport, Cell, Gain};
use super::vectorize::Vectorizer;
use super::{roc_auc_gain, PipelineConfig, TextPolicy};
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::learn::{
    cross_validate_with, gbdt_fit, logreg_fit, out_of_fold, stacking_ensemble, voting_ensemble, EvalReport, GbdtParams,
};
use crate::matrix::FeatureMatrix;
use crate::table::{binarize_and_balance_grouped, infer_kind, load_csv, ColumnKind, SupervisedDataset, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticsMethod {
    /// Text columns sketched with MinHash, the string-similarity baseline.
    MinHash,
    Tfidf,
    Embedding,
    /// Per-column choice from the n-gram profile.
    Auto,
    /// Average of boosted trees on MinHash features and a logistic
    /// regression on raw text embeddings.
    Voting,
    /// Logistic regression over the same two models' out-of-fold outputs.
    Stacking,
}

impl AnalyticsMethod {
    pub fn name(self) -> &'static str {
        match self {
            AnalyticsMethod::MinHash => "minhash",
            AnalyticsMethod::Tfidf => "tfidf",
            AnalyticsMethod::Embedding => "embedding",
            AnalyticsMethod::Auto => "auto",
            AnalyticsMethod::Voting => "voting",
            AnalyticsMethod::Stacking => "stacking",
        }
    }

    pub fn uses_embeddings(self) -> bool {
        !matches!(self, AnalyticsMethod::MinHash | AnalyticsMethod::Tfidf)
    }

    fn policy(self) -> Option<TextPolicy> {
        match self {
            AnalyticsMethod::MinHash => Some(TextPolicy::ForceMinHash),
            AnalyticsMethod::Tfidf => Some(TextPolicy::ForceTfidf),
            AnalyticsMethod::Embedding => Some(TextPolicy::ForceEmbedding),
            AnalyticsMethod::Auto => Some(TextPolicy::Auto),
            AnalyticsMethod::Voting | AnalyticsMethod::Stacking => None,
        }
    }
}

impl std::str::FromStr for AnalyticsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minhash" => Ok(AnalyticsMethod::MinHash),
            "tfidf" | "tf-idf" => Ok(AnalyticsMethod::Tfidf),
            "embedding" | "embeddings" => Ok(AnalyticsMethod::Embedding),
            "auto" => Ok(AnalyticsMethod::Auto),
            "voting" => Ok(AnalyticsMethod::Voting),
            "stacking" => Ok(AnalyticsMethod::Stacking),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Every feature column.
    TextNumeric,
    /// Only the high-cardinality text columns.
    TextOnly,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::TextNumeric => "text_numeric",
            Setting::TextOnly => "text_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub target: String,
    /// Column whose values never straddle folds; not used as a feature.
    #[serde(default)]
    pub group: Option<String>,
    /// Columns removed before anything else.
    #[serde(default)]
    pub drop: Vec<String>,
    #[serde(default)]
    pub delimiter: Option<char>,
}

impl DatasetSpec {
    /// Loads the CSV, resolving a relative path against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Table> {
        let path = base_dir.join(&self.path);
        let delimiter = self.delimiter.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(Error::invalid(format!("delimiter {delimiter:?} is not ASCII")));
        }
        let mut table = load_csv(&path, delimiter as u8, true)?;
        for column in &self.drop {
            table = table.drop_column(column)?;
        }
        Ok(table)
    }
}

/// Names of the columns inferred as free text.
fn text_columns(table: &Table) -> Vec<String> {
    table
        .columns()
        .filter(|(_, v)| infer_kind(v) == ColumnKind::Text)
        .map(|(h, _)| h.to_string())
        .collect()
}

fn gbdt_with_policy(
    train: &Table,
    y_train: &[bool],
    test: &Table,
    config: &PipelineConfig,
    policy: TextPolicy,
    embedder: Option<&Embedder>,
    seed: u64,
) -> Result<Vec<f64>> {
    let config = PipelineConfig {
        text_encoder_policy: policy,
        ..config.clone()
    };
    let (vectorizer, x_train) = Vectorizer::fit_transform(train, &config, embedder)?;
    let x_test = vectorizer.transform(test, embedder)?;
    let params = GbdtParams { seed, ..config.learner };
    gbdt_fit(&x_train, y_train, &params)?.predict_proba(&x_test)
}

/// Logistic regression on the raw embeddings of `columns`.
fn embedding_logreg(
    columns: &[String],
    train: &Table,
    y_train: &[bool],
    test: &Table,
    embedder: Option<&Embedder>,
) -> Result<Vec<f64>> {
    let embedder = embedder.ok_or_else(|| Error::invalid("ensemble methods need an embedding backend"))?;
    let encode = |t: &Table| -> Result<FeatureMatrix> {
        let blocks = columns
            .iter()
            .map(|c| Ok(embedder.embed_batch(t.require_column(c)?)?.with_prefix(c)))
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::hconcat(t.n_rows(), &blocks)
    };
    let model = logreg_fit(&encode(train)?, y_train, 1.0 / y_train.len() as f64)?;
    model.predict_proba(&encode(test)?)
}

/// Fits `method` on the train rows and returns positive-class
/// probabilities for the test rows.
pub fn predict_method(
    method: AnalyticsMethod,
    train: &Table,
    y_train: &[bool],
    test: &Table,
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
    seed: u64,
) -> Result<Vec<f64>> {
    if let Some(policy) = method.policy() {
        return gbdt_with_policy(train, y_train, test, config, policy, embedder, seed);
    }
    let trees = |tr: &Table, y: &[bool], te: &Table| {
        gbdt_with_policy(tr, y, te, config, TextPolicy::ForceMinHash, embedder, seed)
    };
    let tree_probs = trees(train, y_train, test)?;
    let columns = text_columns(train);
    if columns.is_empty() {
        log::warn!("no text column to embed; {} falls back to the tree model", method.name());
        return Ok(tree_probs);
    }
    let linear_probs = embedding_logreg(&columns, train, y_train, test, embedder)?;
    match method {
        AnalyticsMethod::Voting => voting_ensemble(&[tree_probs, linear_probs]),
        _ => {
            let sub = |rows: &[usize]| (train.take_rows(rows), rows.iter().map(|&i| y_train[i]).collect::<Vec<_>>());
            let oof_trees = out_of_fold(y_train, seed, |tr, te| {
                let (t, y) = sub(tr);
                trees(&t, &y, &sub(te).0)
            })?;
            let oof_linear = out_of_fold(y_train, seed, |tr, te| {
                let (t, y) = sub(tr);
                embedding_logreg(&columns, &t, &y, &sub(te).0, embedder)
            })?;
            stacking_ensemble(&[oof_trees, oof_linear], y_train, &[tree_probs, linear_probs])
        }
    }
}

/// Cross-validated ROC-AUC of `method`; every stateful step is fitted on
/// the train fold only. Grouped folds are used when the dataset carries
/// group keys.
pub fn cross_validate(
    dataset: &SupervisedDataset,
    method: AnalyticsMethod,
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
    seed: u64,
) -> Result<EvalReport> {
    cross_validate_with(
        method.name(),
        &dataset.target,
        dataset.group_keys.as_deref(),
        config.folds,
        seed,
        |train, test| {
            let y_train: Vec<bool> = train.iter().map(|&i| dataset.target[i]).collect();
            predict_method(
                method,
                &dataset.features.take_rows(train),
                &y_train,
                &dataset.features.take_rows(test),
                config,
                embedder,
                seed,
            )
        },
    )
}

/// Seed of a (dataset, train size) cell, shared by every method and
/// setting so that they see the same rows and folds.
pub(crate) fn cell_seed(root: u64, dataset: &str, train_size: usize) -> u64 {
    xxhash_rust::xxh3::xxh3_64_with_seed(format!("{dataset}\u{1f}{train_size}").as_bytes(), root)
}

/// Subsamples to `train_size` rows, binarizes and balances the target, and
/// moves the group column out of the features. A table smaller than
/// `train_size` is used whole and a warning is pushed.
pub fn prepare_dataset(
    table: &Table,
    target: &str,
    group: Option<&str>,
    train_size: usize,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<SupervisedDataset> {
    let table = if table.n_rows() > train_size {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = index::sample(&mut rng, table.n_rows(), train_size).into_vec();
        rows.sort_unstable();
        table.take_rows(&rows)
    } else {
        if table.n_rows() < train_size {
            let msg = format!(
                "{}: {} rows available, train size {train_size} clamped",
                table.name(),
                table.n_rows()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        table.clone()
    };
    let mut ds = binarize_and_balance_grouped(&table, target, group, seed)?;
    if let Some(g) = group {
        ds.features = ds.features.drop_column(g)?;
    }
    Ok(ds)
}

/// Cross-validates every (dataset, setting, train size, method) cell,
/// then derives gains against `baseline` and mean ranks. Ranks are taken
/// within each (dataset, setting, train size) task and averaged per train
/// size; a pooled ranking over all tasks is added.
pub fn run_analytics_benchmark(
    datasets: &[(DatasetSpec, Table)],
    methods: &[AnalyticsMethod],
    settings: &[Setting],
    baseline: Option<AnalyticsMethod>,
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
) -> Result<BenchmarkReport> {
    config.validate()?;
    if methods.is_empty() || settings.is_empty() {
        return Err(Error::invalid("benchmark needs at least one method and one setting"));
    }
    let mut warnings = Vec::new();

    // (dataset index, train size, setting, prepared data)
    let mut tasks: Vec<(usize, usize, Setting, SupervisedDataset, u64)> = Vec::new();
    for (d, (spec, table)) in datasets.iter().enumerate() {
        for &size in &config.train_sizes {
            let seed = cell_seed(config.seed, &spec.name, size);
            let ds = prepare_dataset(table, &spec.target, spec.group.as_deref(), size, seed, &mut warnings)?;
            for &setting in settings {
                let data = match setting {
                    Setting::TextNumeric => ds.clone(),
                    Setting::TextOnly => {
                        let cols = text_columns(&ds.features);
                        if cols.is_empty() {
                            warnings.push(format!("{}: no text column, text_only setting skipped", spec.name));
                            continue;
                        }
                        SupervisedDataset {
                            features: ds.features.select_columns(&cols)?,
                            ..ds.clone()
                        }
                    }
                };
                tasks.push((d, size, setting, data, seed));
            }
        }
    }

    let jobs: Vec<(usize, AnalyticsMethod)> = (0..tasks.len())
        .flat_map(|t| methods.iter().map(move |&m| (t, m)))
        .collect();
    let evals: Vec<EvalReport> = jobs
        .par_iter()
        .map(|&(t, method)| {
            let (_, _, _, data, seed) = &tasks[t];
            cross_validate(data, method, config, embedder, *seed)
        })
        .collect::<Result<_>>()?;

    let mut report = BenchmarkReport::new("analytics");
    let method_names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    let mut rank_tasks = Vec::new();
    for (t, (d, size, setting, data, _)) in tasks.iter().enumerate() {
        let row = &evals[t * methods.len()..(t + 1) * methods.len()];
        let dataset = &datasets[*d].0.name;
        for (method, eval) in methods.iter().zip(row) {
            report.cells.push(Cell {
                dataset: dataset.clone(),
                setting: Some(setting.name().to_string()),
                method: method.name().to_string(),
                train_size: Some(*size),
                n_rows: Some(data.n_rows()),
                metric: "roc_auc".to_string(),
                mean: eval.mean,
                stderr: Some(eval.stderr),
                fold_scores: eval.fold_scores.clone(),
                threshold: None,
            });
        }
        if let Some(base) = baseline {
            let base_auc = methods
                .iter()
                .position(|&m| m == base)
                .map(|i| row[i].mean)
                .ok_or_else(|| Error::invalid(format!("baseline {} is not among the methods", base.name())))?;
            for (method, eval) in methods.iter().zip(row) {
                report.gains.push(Gain {
                    dataset: dataset.clone(),
                    setting: Some(setting.name().to_string()),
                    train_size: Some(*size),
                    method: method.name().to_string(),
                    baseline: base.name().to_string(),
                    gain_percent: roc_auc_gain(eval.mean, base_auc)?,
                });
            }
        }
        rank_tasks.push((Some(*size), row.iter().map(|e| e.mean).collect()));
    }
    report.mean_ranks = mean_rank_entries(&method_names, &rank_tasks)?;
    report.metadata.insert(
        "rank_pooling".into(),
        "ranks within each (dataset, setting, train_size); averaged per train_size, and over all tasks when train_size is null".into(),
    );
    report.metadata.insert(
        "settings".into(),
        serde_json::to_value(settings.iter().map(|s| s.name()).collect::<Vec<_>>())?,
    );
    report.metadata.insert("folds".into(), config.folds.into());
    report.metadata.insert("warnings".into(), serde_json::to_value(warnings)?);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGain {
    pub column: String,
    pub baseline_auc: f64,
    pub method_auc: f64,
    pub gain_percent: f64,
}

/// Per-column gains: each string column in turn is re-encoded with
/// `replacement` while every other column keeps the MinHash-baseline
/// routing.
pub fn column_gains(
    dataset: &SupervisedDataset,
    replacement: TextPolicy,
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
    seed: u64,
) -> Result<Vec<ColumnGain>> {
    let base_config = PipelineConfig {
        text_encoder_policy: TextPolicy::ForceMinHash,
        ..config.clone()
    };
    let baseline = cross_validate(dataset, AnalyticsMethod::MinHash, &base_config, embedder, seed)?.mean;
    let candidates: Vec<String> = dataset
        .features
        .columns()
        .filter(|(_, v)| matches!(infer_kind(v), ColumnKind::MidCardCategorical | ColumnKind::Text))
        .map(|(h, _)| h.to_string())
        .collect();
    candidates
        .par_iter()
        .map(|column| {
            let mut c = base_config.clone();
            c.column_overrides.insert(column.clone(), replacement);
            let method_auc = cross_validate(dataset, AnalyticsMethod::MinHash, &c, embedder, seed)?.mean;
            Ok(ColumnGain {
                column: column.clone(),
                baseline_auc: baseline,
                method_auc,
                gain_percent: roc_auc_gain(method_auc, baseline)?,
            })
        })
        .collect()
}
