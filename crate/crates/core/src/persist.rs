//! Versioned JSON envelope for fitted encoder and model state.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    state: T,
}

/// Fitted state that can be saved and reloaded across runs.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            schema_version: SCHEMA_VERSION,
            kind: Self::KIND.to_string(),
            state: self,
        })?)
    }

    fn from_json(json: &str) -> Result<Self> {
        let env: Envelope<Self> = serde_json::from_str(json)?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: SCHEMA_VERSION,
                found: env.schema_version,
            });
        }
        if env.kind != Self::KIND {
            return Err(Error::invalid(format!(
                "expected a {:?} document, found {:?}",
                Self::KIND,
                env.kind
            )));
        }
        Ok(env.state)
    }
}
