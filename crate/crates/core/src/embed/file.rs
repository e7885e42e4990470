use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EmbeddingBackend;
use crate::error::{Error, Result};

/// One line of a precomputed embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub text: String,
    pub vector: Vec<f64>,
}

/// Serves precomputed vectors from a JSON-lines file of [`FileRecord`]s.
/// Texts absent from the file are an error.
#[derive(Debug, Clone)]
pub struct FileBackend {
    model_id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FileBackend {
    pub fn load(model_id: impl Into<String>, path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = expected_dim;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FileRecord = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let expected = *dim.get_or_insert(rec.vector.len());
            if rec.vector.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: rec.vector.len(),
                });
            }
            vectors.insert(rec.text, rec.vector);
        }
        let dim = dim.ok_or_else(|| Error::invalid(format!("embedding file {} is empty", path.display())))?;
        Ok(FileBackend {
            model_id: model_id.into(),
            dim,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl EmbeddingBackend for FileBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .cloned()
                    .ok_or_else(|| Error::MissingEmbedding(t.clone()))
            })
            .collect()
    }
}

pub fn write_embedding_file<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = (&'a str, &'a [f64])>,
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (text, vector) in records {
        serde_json::to_writer(
            &mut out,
            &FileRecord {
                text: text.to_string(),
                vector: vector.to_vec(),
            },
        )?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_known_texts_and_rejects_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        write_embedding_file(&path, [("a", &[1.0, 0.0][..]), ("b", &[0.0, 1.0][..])]).unwrap();
        let backend = FileBackend::load("file", &path, None).unwrap();
        assert_eq!(backend.dim(), 2);
        let out = backend.embed(&["b".to_string()]).unwrap();
        assert_eq!(out, vec![vec![0.0, 1.0]]);
        assert!(matches!(
            backend.embed(&["zzz".to_string()]),
            Err(Error::MissingEmbedding(t)) if t == "zzz"
        ));
        assert!(FileBackend::load("file", &path, Some(3)).is_err());
    }

    #[test]
    fn ragged_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        write_embedding_file(&path, [("a", &[1.0, 0.0][..]), ("b", &[1.0][..])]).unwrap();
        assert!(matches!(
            FileBackend::load("file", &path, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
