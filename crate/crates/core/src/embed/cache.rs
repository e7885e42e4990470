//! Content-addressed embedding cache backed by an append-only JSON-lines
//! journal.
//!
//! A record is committed once its terminating newline is on disk. On open,
//! an unterminated trailing record is discarded and the file is truncated
//! back to the last committed record; any malformed committed record is an
//! integrity error.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type ContentHash = [u8; 32];

pub fn content_hash(text: &str) -> ContentHash {
    Sha256::digest(text.as_bytes()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCacheEntry {
    pub model_id: String,
    #[serde(with = "hex_hash")]
    pub content_hash: ContentHash,
    pub dim: usize,
    pub vector: Vec<f64>,
}

impl EmbeddingCacheEntry {
    pub fn new(model_id: &str, text: &str, vector: Vec<f64>) -> Self {
        EmbeddingCacheEntry {
            model_id: model_id.to_string(),
            content_hash: content_hash(text),
            dim: vector.len(),
            vector,
        }
    }
}

mod hex_hash {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::ContentHash;

    pub fn serialize<S: Serializer>(h: &ContentHash, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&h.iter().map(|b| format!("{b:02x}")).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ContentHash, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 64 || !s.is_ascii() {
            return Err(D::Error::custom("content hash must be 64 hex digits"));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}

type Key = (String, ContentHash);

#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    entries: RwLock<HashMap<Key, Vec<f64>>>,
    journal: Mutex<File>,
}

impl EmbeddingCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let io_err = |e| Error::io(&path, e);
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;

        let mut entries = HashMap::new();
        let mut committed = 0usize;
        for (line_no, line) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
            if line.last() != Some(&b'\n') {
                // Torn trailing record.
                break;
            }
            committed += line.len();
            let body = &line[..line.len() - 1];
            if body.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let entry = parse_entry(body).map_err(|reason| Error::CacheIntegrity {
                line: line_no + 1,
                reason,
            })?;
            entries.insert((entry.model_id, entry.content_hash), entry.vector);
        }
        if committed < bytes.len() {
            log::warn!(
                "discarding {} bytes of torn record at the end of {}",
                bytes.len() - committed,
                path.display()
            );
            file.set_len(committed as u64).map_err(io_err)?;
        }
        // Appends go through an O_APPEND handle so they always land after
        // the committed prefix.
        let journal = OpenOptions::new().append(true).open(&path).map_err(io_err)?;
        Ok(EmbeddingCache {
            path,
            entries: RwLock::new(entries),
            journal: Mutex::new(journal),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model_id: &str, hash: &ContentHash) -> Option<Vec<f64>> {
        self.entries.read().get(&(model_id.to_string(), *hash)).cloned()
    }

    pub fn get_text(&self, model_id: &str, text: &str) -> Option<Vec<f64>> {
        self.get(model_id, &content_hash(text))
    }

    /// Appends the entry to the journal. Later puts of the same key win.
    pub fn put(&self, entry: EmbeddingCacheEntry) -> Result<()> {
        self.put_all(std::iter::once(entry))
    }

    pub fn put_all(&self, entries: impl IntoIterator<Item = EmbeddingCacheEntry>) -> Result<()> {
        let entries: Vec<EmbeddingCacheEntry> = entries.into_iter().collect();
        let mut buf = Vec::new();
        for e in &entries {
            if e.vector.len() != e.dim {
                return Err(Error::DimensionMismatch {
                    expected: e.dim,
                    found: e.vector.len(),
                });
            }
            serde_json::to_writer(&mut buf, e)?;
            buf.push(b'\n');
        }
        {
            let mut journal = self.journal.lock();
            journal.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
            journal.flush().map_err(|e| Error::io(&self.path, e))?;
        }
        let mut map = self.entries.write();
        for e in entries {
            map.insert((e.model_id, e.content_hash), e.vector);
        }
        Ok(())
    }

    pub fn sync(&self) -> Result<()> {
        self.journal.lock().sync_data().map_err(|e| Error::io(&self.path, e))
    }
}

fn parse_entry(body: &[u8]) -> std::result::Result<EmbeddingCacheEntry, String> {
    let entry: EmbeddingCacheEntry = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    if entry.vector.len() != entry.dim {
        return Err(format!("vector has {} values, dim is {}", entry.vector.len(), entry.dim));
    }
    Ok(entry)
}
