//! Artifact writing with a content-hash manifest. Every emitted table or
//! figure is recorded in `manifest.json` along with the config hash that
//! produced it; re-running with the same config reproduces identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Artifact {
    pub name: String,
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub artifacts: Vec<Artifact>,
}

/// Collects artifacts for one run and maintains the merged manifest.
pub struct Report {
    out_dir: PathBuf,
    config_hash: String,
    artifacts: Vec<Artifact>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Report {
    pub fn new(out_dir: impl Into<PathBuf>, config_hash: String) -> Result<Report> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(Report {
            out_dir,
            config_hash,
            artifacts: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Write one artifact file and record it.
    pub fn add(&mut self, name: &str, rel_path: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            name: name.to_string(),
            path: rel_path.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            config_hash: self.config_hash.clone(),
        });
        Ok(path)
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    /// Merge this run's artifacts into `manifest.json` (upsert by path,
    /// sorted by path).
    pub fn write_manifest(&self) -> Result<PathBuf> {
        let manifest_path = self.out_dir.join("manifest.json");
        let mut manifest: Manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::Other(format!("corrupt manifest: {e}")))?,
            Err(_) => Manifest::default(),
        };
        for artifact in &self.artifacts {
            match manifest.artifacts.iter_mut().find(|a| a.path == artifact.path) {
                Some(slot) => *slot = artifact.clone(),
                None => manifest.artifacts.push(artifact.clone()),
            }
        }
        manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

/// Load the manifest from an output directory.
pub fn read_manifest(out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = out_dir.as_ref().join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Other(format!("corrupt manifest: {e}")))
}
