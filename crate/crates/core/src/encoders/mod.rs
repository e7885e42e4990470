//! Classical column encoders.

mod minhash;
mod tabular;
mod tfidf;

pub use minhash::{estimate_jaccard, minhash_encode, minhash_signature, MinHashParams};
pub use tabular::{
    datetime_encode, numeric_encode, onehot_encode, standardize, MeanImputer, OneHotEncoder, StandardScaler,
    DATETIME_FEATURES,
};
pub use tfidf::{tfidf_fit_transform, TfidfModel, TfidfParams};
