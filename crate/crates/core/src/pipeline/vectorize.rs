use serde::{Deserialize, Serialize};

use super::{PipelineConfig, TextPolicy};
use crate::embed::Embedder;
use crate::encoders::{
    datetime_encode, minhash_encode, numeric_encode, MeanImputer, MinHashParams, OneHotEncoder, StandardScaler,
    TfidfModel,
};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::pca::PcaModel;
use crate::persist::Persist;
use crate::profile::{profile_column, NgramProfile, Regime};
use crate::table::{infer_kind, ColumnKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Numeric,
    Datetime,
    OneHot,
    MinHash,
    Tfidf,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnPlan {
    pub column: String,
    pub kind: ColumnKind,
    pub encoding: Encoding,
    /// Profile of the train values, when the route depended on it.
    pub profile: Option<NgramProfile>,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Numeric { imputer: MeanImputer, scaler: StandardScaler },
    Datetime { imputer: MeanImputer, scaler: StandardScaler },
    OneHot(OneHotEncoder),
    MinHash(MinHashParams),
    Tfidf { model: TfidfModel, pca: PcaModel },
    Embedding { model_id: String, pca: Option<PcaModel> },
}

/// Column-routed encoder fitted on one table and applicable to any table
/// with the same headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    columns: Vec<(ColumnPlan, Fitted)>,
}

impl Persist for Vectorizer {
    const KIND: &'static str = "vectorizer";
}

fn route(column: &str, kind: ColumnKind, values: &[String], config: &PipelineConfig) -> (Encoding, Option<NgramProfile>) {
    let policy = match config.column_overrides.get(column) {
        Some(&p) if kind.is_string() => p,
        _ => match kind {
            ColumnKind::Numeric => return (Encoding::Numeric, None),
            ColumnKind::Datetime => return (Encoding::Datetime, None),
            ColumnKind::LowCardCategorical => return (Encoding::OneHot, None),
            ColumnKind::MidCardCategorical => return (Encoding::MinHash, None),
            ColumnKind::Text => config.text_encoder_policy,
        },
    };
    match policy {
        TextPolicy::ForceMinHash => (Encoding::MinHash, None),
        TextPolicy::ForceTfidf => (Encoding::Tfidf, None),
        TextPolicy::ForceEmbedding => (Encoding::Embedding, None),
        TextPolicy::Auto => {
            let profile = profile_column(column, values, &config.profile_params(), config.seed);
            let encoding = match profile.regime {
                Regime::Dirty => Encoding::MinHash,
                Regime::Diverse => Encoding::Embedding,
            };
            (encoding, Some(profile))
        }
    }
}

fn need_embedder(embedder: Option<&Embedder>) -> Result<&Embedder> {
    embedder.ok_or_else(|| Error::invalid("an embedding-routed column needs an embedding backend"))
}

impl Vectorizer {
    pub fn fit(train: &Table, config: &PipelineConfig, embedder: Option<&Embedder>) -> Result<Self> {
        Ok(Vectorizer::fit_transform(train, config, embedder)?.0)
    }

    /// Fits every column on `train` and returns its encoding as well.
    pub fn fit_transform(
        train: &Table,
        config: &PipelineConfig,
        embedder: Option<&Embedder>,
    ) -> Result<(Self, FeatureMatrix)> {
        if train.n_cols() == 0 {
            return Err(Error::invalid("nothing to vectorize: table has no columns"));
        }
        let mut columns = Vec::with_capacity(train.n_cols());
        let mut blocks = Vec::with_capacity(train.n_cols());
        for (name, values) in train.columns() {
            let kind = infer_kind(values);
            let (encoding, profile) = route(name, kind, values, config);
            let (fitted, block) = match encoding {
                Encoding::Numeric | Encoding::Datetime => {
                    let raw = if encoding == Encoding::Numeric {
                        numeric_encode(values)
                    } else {
                        datetime_encode(values)
                    };
                    let imputer = MeanImputer::fit(&raw);
                    let imputed = imputer.transform(&raw)?;
                    let scaler = StandardScaler::fit(&imputed);
                    let block = scaler.transform(&imputed)?;
                    let fitted = if encoding == Encoding::Numeric {
                        Fitted::Numeric { imputer, scaler }
                    } else {
                        Fitted::Datetime { imputer, scaler }
                    };
                    (fitted, block)
                }
                Encoding::OneHot => {
                    let enc = OneHotEncoder::fit(values);
                    let block = enc.transform(values);
                    (Fitted::OneHot(enc), block)
                }
                Encoding::MinHash => (Fitted::MinHash(config.minhash), minhash_encode(values, &config.minhash)),
                Encoding::Tfidf => {
                    let model = TfidfModel::fit(values, config.tfidf)?;
                    let sparse = model.transform(values);
                    let pca = PcaModel::fit_sparse(&sparse, config.pca_dim)?;
                    let block = pca.transform_sparse(&sparse)?;
                    (Fitted::Tfidf { model, pca }, block)
                }
                Encoding::Embedding => {
                    let embedder = need_embedder(embedder)?;
                    let raw = embedder.embed_batch(values)?;
                    let (pca, block) = if config.embedding_pca {
                        let pca = PcaModel::fit(&raw, config.pca_dim)?;
                        let block = pca.transform(&raw)?;
                        (Some(pca), block)
                    } else {
                        (None, raw)
                    };
                    let model_id = embedder.model_id().to_string();
                    (Fitted::Embedding { model_id, pca }, block)
                }
            };
            let plan = ColumnPlan {
                column: name.to_string(),
                kind,
                encoding,
                profile,
                width: block.n_cols(),
            };
            columns.push((plan, fitted));
            blocks.push(block.with_prefix(name));
        }
        let matrix = FeatureMatrix::hconcat(train.n_rows(), &blocks)?;
        Ok((Vectorizer { columns }, matrix))
    }

    pub fn transform(&self, table: &Table, embedder: Option<&Embedder>) -> Result<FeatureMatrix> {
        let mut blocks = Vec::with_capacity(self.columns.len());
        for (plan, fitted) in &self.columns {
            let values = table.require_column(&plan.column)?;
            let block = match fitted {
                Fitted::Numeric { imputer, scaler } => scaler.transform(&imputer.transform(&numeric_encode(values))?)?,
                Fitted::Datetime { imputer, scaler } => {
                    scaler.transform(&imputer.transform(&datetime_encode(values))?)?
                }
                Fitted::OneHot(enc) => enc.transform(values),
                Fitted::MinHash(params) => minhash_encode(values, params),
                Fitted::Tfidf { model, pca } => pca.transform_sparse(&model.transform(values))?,
                Fitted::Embedding { model_id, pca } => {
                    let embedder = need_embedder(embedder)?;
                    if embedder.model_id() != model_id {
                        return Err(Error::invalid(format!(
                            "column {:?} was fitted with model {model_id:?}, got {:?}",
                            plan.column,
                            embedder.model_id()
                        )));
                    }
                    let raw = embedder.embed_batch(values)?;
                    match pca {
                        Some(pca) => pca.transform(&raw)?,
                        None => raw,
                    }
                }
            };
            blocks.push(block.with_prefix(&plan.column));
        }
        FeatureMatrix::hconcat(table.n_rows(), &blocks)
    }

    pub fn plan(&self) -> Vec<ColumnPlan> {
        self.columns.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(|(p, _)| p.width).sum()
    }
}

/// Fits the routed encoders on `train` and encodes `apply`.
pub fn vectorize_table(
    train: &Table,
    apply: &Table,
    config: &PipelineConfig,
    embedder: Option<&Embedder>,
) -> Result<FeatureMatrix> {
    Vectorizer::fit(train, config, embedder)?.transform(apply, embedder)
}
