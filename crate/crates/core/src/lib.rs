//! Vectorization of string columns in tables.
//!
//! Columns are typed by [`table::infer_column_kinds`], profiled for
//! character n-gram diversity by [`profile`], and routed between MinHash
//! sketches ([`encoders`]) and language-model embeddings ([`embed`]) reduced
//! with [`pca`]. The resulting features feed the learners in [`learn`] or
//! the nearest-neighbor fuzzy join in [`join`]; [`pipeline`] ties them
//! into benchmarks driven by a JSON config.

pub mod embed;
pub mod encoders;
pub mod error;
pub mod join;
pub mod learn;
pub mod matrix;
pub mod pca;
pub mod persist;
pub mod pipeline;
pub mod profile;
pub mod table;

pub use error::{Error, Result};
pub use matrix::{FeatureMatrix, SparseMatrix};
