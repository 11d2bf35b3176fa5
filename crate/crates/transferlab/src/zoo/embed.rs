//! Pretrained embedding files: standard text layout, one word followed by
//! its space-separated float components per line.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PretrainedEmbeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl PretrainedEmbeddings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap().to_lowercase();
            let values: std::result::Result<Vec<f64>, _> =
                fields.map(str::parse::<f64>).collect();
            let values = values.map_err(|_| Error::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: "non-numeric vector component".into(),
            })?;
            if values.is_empty() {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: "line has no vector components".into(),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::MalformedLine {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        reason: format!("expected {d} components, found {}", values.len()),
                    })
                }
                Some(_) => {}
            }
            vectors.insert(word, values);
        }
        let dim = dim.ok_or_else(|| Error::EmptyCorpus(path.to_path_buf()))?;
        Ok(PretrainedEmbeddings { dim, vectors })
    }

    pub fn from_vectors(vectors: HashMap<String, Vec<f64>>, dim: usize) -> Self {
        PretrainedEmbeddings { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_text_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "fine 0.1 0.2 0.3\ndull -0.1 0.0 0.5\n").unwrap();
        let emb = PretrainedEmbeddings::load(&path).unwrap();
        assert_eq!(emb.dim(), 3);
        assert_eq!(emb.get("fine"), Some(&[0.1, 0.2, 0.3][..]));
        assert_eq!(emb.get("missing"), None);
    }

    #[test]
    fn rejects_ragged_dims() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "fine 0.1 0.2\ndull 0.3\n").unwrap();
        assert!(PretrainedEmbeddings::load(&path).is_err());
    }
}
