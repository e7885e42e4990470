//! Language-model embeddings through pluggable backends.
//!
//! The pipeline never runs a model itself: vectors come from an HTTP
//! embeddings service, a precomputed JSON-lines file, or a deterministic
//! mock. [`Embedder`] deduplicates texts, serves repeats from the
//! [`EmbeddingCache`] and sends the remaining misses in bounded batches.

mod cache;
mod file;
mod http;
mod mock;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{content_hash, ContentHash, EmbeddingCache, EmbeddingCacheEntry};
pub use file::{write_embedding_file, FileBackend, FileRecord};
pub use http::HttpBackend;
pub use mock::{mock_embed, MockBackend};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Environment variable holding the bearer token for the HTTP backend.
pub const API_KEY_ENV: &str = "TABVEC_API_KEY";
pub const DEFAULT_MOCK_DIM: usize = 64;

pub trait EmbeddingBackend: Send + Sync {
    fn model_id(&self) -> &str;

    /// Embeds every text, returning vectors in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    File,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model_id: String,
    pub endpoint: Option<String>,
    /// Never serialized; filled from [`API_KEY_ENV`] when absent.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub batch_size: usize,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Output dimension of the mock backend (default [`DEFAULT_MOCK_DIM`]);
    /// expected width for the others.
    pub dim: Option<usize>,
    /// Vector file for the file backend.
    pub path: Option<PathBuf>,
    pub seed: u64,
    pub cache_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            model_id: "mock".to_string(),
            endpoint: None,
            api_key: None,
            batch_size: 128,
            max_retries: 5,
            initial_backoff_ms: 1000,
            max_in_flight: 4,
            dim: None,
            path: None,
            seed: 0,
            cache_path: None,
        }
    }
}

impl BackendConfig {
    pub fn mock(dim: usize, seed: u64) -> Self {
        BackendConfig {
            dim: Some(dim),
            seed,
            ..Default::default()
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::File,
            model_id: "file".to_string(),
            path: Some(path.into()),
            ..Default::default()
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn EmbeddingBackend>> {
        Ok(match self.kind {
            BackendKind::Mock => {
                let dim = self.dim.unwrap_or(DEFAULT_MOCK_DIM);
                if dim == 0 {
                    return Err(Error::invalid("mock backend dimension must be positive"));
                }
                Box::new(MockBackend::new(&self.model_id, dim, self.seed))
            }
            BackendKind::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::invalid("file backend needs `path`"))?;
                Box::new(FileBackend::load(&self.model_id, path, self.dim)?)
            }
            BackendKind::Http => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::invalid("http backend needs `endpoint`"))?;
                let key = self.api_key.clone().or_else(|| std::env::var(API_KEY_ENV).ok());
                Box::new(HttpBackend::new(
                    endpoint,
                    &self.model_id,
                    key,
                    self.max_retries,
                    Duration::from_millis(self.initial_backoff_ms),
                )?)
            }
        })
    }
}

/// Counters of backend traffic, for verifying cache and batching behavior.
#[derive(Debug, Default)]
pub struct BackendStats {
    calls: AtomicUsize,
    texts: AtomicUsize,
    cache_hits: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatsSnapshot {
    pub backend_calls: usize,
    pub texts_sent: usize,
    pub cache_hits: usize,
}

impl BackendStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            backend_calls: self.calls.load(Ordering::SeqCst),
            texts_sent: self.texts.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }
}

pub struct Embedder {
    backend: Box<dyn EmbeddingBackend>,
    cache: Option<Arc<EmbeddingCache>>,
    batch_size: usize,
    max_in_flight: usize,
    expected_dim: Option<usize>,
    stats: BackendStats,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder")
            .field("model_id", &self.backend.model_id())
            .field("batch_size", &self.batch_size)
            .field("cache", &self.cache.as_ref().map(|c| c.path().to_path_buf()))
            .finish()
    }
}

impl Embedder {
    pub fn new(
        backend: Box<dyn EmbeddingBackend>,
        cache: Option<Arc<EmbeddingCache>>,
        batch_size: usize,
        max_in_flight: usize,
    ) -> Result<Self> {
        if batch_size == 0 || max_in_flight == 0 {
            return Err(Error::invalid("batch_size and max_in_flight must be positive"));
        }
        Ok(Embedder {
            backend,
            cache,
            batch_size,
            max_in_flight,
            expected_dim: None,
            stats: BackendStats::default(),
        })
    }

    /// Builds the configured backend and opens `cache_path` if set.
    pub fn from_config(config: &BackendConfig) -> Result<Self> {
        let cache = config
            .cache_path
            .as_ref()
            .map(EmbeddingCache::open)
            .transpose()?
            .map(Arc::new);
        let mut e = Embedder::new(config.build_backend()?, cache, config.batch_size, config.max_in_flight)?;
        e.expected_dim = config.dim;
        Ok(e)
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    /// Embeds `texts` into an `n × dim` matrix whose row `i` depends only on
    /// `texts[i]`.
    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<FeatureMatrix> {
        if texts.is_empty() {
            return Err(Error::invalid("embed_batch on an empty list"));
        }
        let model = self.backend.model_id().to_string();

        let mut unique: Vec<&str> = Vec::new();
        let mut slot_of: HashMap<&str, usize> = HashMap::new();
        let row_slots: Vec<usize> = texts
            .iter()
            .map(|t| {
                let t = t.as_ref();
                *slot_of.entry(t).or_insert_with(|| {
                    unique.push(t);
                    unique.len() - 1
                })
            })
            .collect();

        let mut vectors: Vec<Option<Vec<f64>>> = unique
            .iter()
            .map(|t| self.cache.as_ref().and_then(|c| c.get_text(&model, t)))
            .collect();
        let misses: Vec<usize> = (0..unique.len()).filter(|&i| vectors[i].is_none()).collect();
        self.stats
            .cache_hits
            .fetch_add(unique.len() - misses.len(), Ordering::SeqCst);

        let batches: Vec<&[usize]> = misses.chunks(self.batch_size).collect();
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        let inputs: Vec<String> = batch.iter().map(|&i| unique[i].to_string()).collect();
                        s.spawn(move || {
                            self.stats.calls.fetch_add(1, Ordering::SeqCst);
                            self.stats.texts.fetch_add(inputs.len(), Ordering::SeqCst);
                            self.backend.embed(&inputs)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for (batch, result) in wave.iter().zip(results) {
                let out = result?;
                if out.len() != batch.len() {
                    return Err(Error::Backend(format!(
                        "backend returned {} vectors for {} texts",
                        out.len(),
                        batch.len()
                    )));
                }
                let mut entries = Vec::with_capacity(batch.len());
                for (&i, v) in batch.iter().zip(out) {
                    if self.cache.is_some() {
                        entries.push(EmbeddingCacheEntry::new(&model, unique[i], v.clone()));
                    }
                    vectors[i] = Some(v);
                }
                if let Some(cache) = &self.cache {
                    cache.put_all(entries)?;
                }
            }
        }

        let vectors: Vec<Vec<f64>> = vectors.into_iter().map(|v| v.expect("every slot filled")).collect();
        let dim = self.expected_dim.unwrap_or(vectors[0].len());
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Backend("backend returned non-finite values".into()));
        }
        let names = (0..dim).map(|j| format!("emb_{j}")).collect();
        let mut values = Vec::with_capacity(texts.len() * dim);
        for slot in row_slots {
            values.extend_from_slice(&vectors[slot]);
        }
        FeatureMatrix::new(texts.len(), values, names)
    }
}

/// One-shot form of [`Embedder::embed_batch`].
pub fn embed_batch<S: AsRef<str>>(
    texts: &[S],
    config: &BackendConfig,
    cache: Option<Arc<EmbeddingCache>>,
) -> Result<FeatureMatrix> {
    let mut e = Embedder::new(config.build_backend()?, cache, config.batch_size, config.max_in_flight)?;
    e.expected_dim = config.dim;
    e.embed_batch(texts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use parking_lot::Mutex;

    /// Records every batch it receives.
    struct Recorder {
        inner: MockBackend,
        seen: Mutex<Vec<Vec<String>>>,
    }

    impl EmbeddingBackend for Recorder {
        fn model_id(&self) -> &str {
            self.inner.model_id()
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            self.seen.lock().push(texts.to_vec());
            self.inner.embed(texts)
        }
    }

    struct Ragged;

    impl EmbeddingBackend for Ragged {
        fn model_id(&self) -> &str {
            "ragged"
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(texts.iter().map(|t| vec![1.0; t.len() + 1]).collect())
        }
    }

    fn recorder() -> Box<Recorder> {
        Box::new(Recorder {
            inner: MockBackend::new("mock", 8, 0),
            seen: Mutex::new(Vec::new()),
        })
    }

    #[test]
    fn deduplicates_before_calling_backend() {
        let e = Embedder::new(recorder(), None, 128, 4).unwrap();
        let m = e.embed_batch(&["x", "x", "y"]).unwrap();
        assert_eq!(m.row(0), m.row(1));
        assert_ne!(m.row(0), m.row(2));
        assert_eq!(e.stats().texts_sent, 2);
        assert_eq!(e.stats().backend_calls, 1);
    }

    #[test]
    fn cache_hits_skip_backend() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(EmbeddingCache::open(dir.path().join("c.jsonl")).unwrap());
        let e = Embedder::new(recorder(), Some(cache.clone()), 2, 2).unwrap();
        let first = e.embed_batch(&["a", "b", "c", "a"]).unwrap();
        assert_eq!(e.stats().backend_calls, 2);
        let second = e.embed_batch(&["c", "a", "b"]).unwrap();
        assert_eq!(e.stats().backend_calls, 2);
        assert_eq!(e.stats().cache_hits, 3);
        assert_eq!(second.row(0), first.row(2));

        // A fresh embedder over the reopened cache makes no calls either.
        let reopened = Arc::new(EmbeddingCache::open(dir.path().join("c.jsonl")).unwrap());
        let e2 = Embedder::new(recorder(), Some(reopened), 2, 2).unwrap();
        assert_eq!(e2.embed_batch(&["a", "b", "c"]).unwrap().row(1), first.row(1));
        assert_eq!(e2.stats().backend_calls, 0);
    }

    #[test]
    fn batches_are_bounded() {
        let e = Embedder::new(recorder(), None, 3, 2).unwrap();
        let texts: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        e.embed_batch(&texts).unwrap();
        assert_eq!(e.stats().backend_calls, 4);
    }

    #[test]
    fn rows_depend_only_on_their_text() {
        let e = Embedder::new(recorder(), None, 4, 2).unwrap();
        let texts = ["alpha", "beta", "gamma", "delta", "beta"];
        let m = e.embed_batch(&texts).unwrap();
        let perm = [3, 0, 4, 2, 1];
        let permuted: Vec<&str> = perm.iter().map(|&i| texts[i]).collect();
        let pm = e.embed_batch(&permuted).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(pm.row(k), m.row(i));
        }
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let e = Embedder::new(Box::new(Ragged), None, 8, 1).unwrap();
        assert!(matches!(e.embed_batch(&["a", "bb"]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_input_is_rejected() {
        let e = Embedder::new(recorder(), None, 8, 1).unwrap();
        assert!(e.embed_batch::<&str>(&[]).is_err());
    }

    #[test]
    fn config_round_trips_without_secret() {
        let mut cfg = BackendConfig::mock(16, 4);
        cfg.api_key = Some("sk-secret".into());
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(!json.contains("sk-secret"));
        let back: BackendConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.dim, Some(16));
        assert_eq!(back.api_key, None);
        let partial: BackendConfig = serde_json::from_str(r#"{"kind":"file","path":"v.jsonl"}"#).unwrap();
        assert_eq!(partial.batch_size, 128);
        assert_eq!(partial.max_retries, 5);
    }
}
