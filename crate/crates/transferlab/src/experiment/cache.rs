//! Model and matrix caching keyed by content hashes, so sweeps reuse the
//! expensive artifacts. A cached model is only reused when its recorded
//! (data fingerprint, hyper fingerprint) both match the current run.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::transfer::{AttackEngine, TransferBudget, TransferMatrix};
use crate::zoo::{
    dataset_fingerprint, train, Classifier, ModelSpec, PretrainedEmbeddings, TrainConfig,
};

pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<ModelCache> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ModelCache { dir })
    }

    pub fn model_path(&self, spec: &ModelSpec) -> PathBuf {
        self.dir.join(format!("{}.model", spec.id()))
    }

    pub fn report_path(&self, spec: &ModelSpec) -> PathBuf {
        self.dir.join(format!("{}.report.json", spec.id()))
    }

    /// Load the cached model when (spec, data, hyper) all match, else train
    /// and persist. Returns the classifier and whether the cache was hit.
    pub fn load_or_train(
        &self,
        spec: &ModelSpec,
        data: &Dataset,
        hyper: &TrainConfig,
        pretrained: Option<&PretrainedEmbeddings>,
    ) -> Result<(Classifier, bool)> {
        let path = self.model_path(spec);
        if path.exists() {
            if let Ok(clf) = Classifier::load(&path) {
                let report = clf.report();
                if report.data_fingerprint == dataset_fingerprint(data)
                    && report.hyper_fingerprint == hyper.fingerprint()
                    && clf.spec() == spec
                {
                    return Ok((clf, true));
                }
            }
        }
        let clf = train(spec, data, hyper, pretrained)?;
        clf.save(&path)?;
        let report_json =
            serde_json::to_string_pretty(clf.report()).expect("report serializes");
        let report_path = self.report_path(spec);
        fs::write(&report_path, report_json).map_err(|e| Error::io(&report_path, e))?;
        Ok((clf, false))
    }
}

/// Cache key for a transfer matrix: dataset, models, engine, budget.
pub fn matrix_key(
    data: &Dataset,
    model_ids: &[String],
    engine: &AttackEngine,
    budget: &TransferBudget,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(dataset_fingerprint(data).as_bytes());
    for id in model_ids {
        hasher.update(id.as_bytes());
        hasher.update([0xfe]);
    }
    hasher.update(serde_json::to_vec(engine).expect("engine serializes"));
    hasher.update(serde_json::to_vec(budget).expect("budget serializes"));
    hasher
        .finalize()
        .iter()
        .take(12)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn load_matrix(cache_dir: &Path, key: &str) -> Option<TransferMatrix> {
    let path = cache_dir.join(format!("matrix-{key}.json"));
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn store_matrix(cache_dir: &Path, key: &str, matrix: &TransferMatrix) -> Result<()> {
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let path = cache_dir.join(format!("matrix-{key}.json"));
    let json = serde_json::to_string(matrix).expect("matrix serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Example, PosLexicon};

    fn toy_dataset(tag: &str) -> Dataset {
        let lex = PosLexicon::new();
        let mk = |id: u64, text: &str, label: usize| Example {
            id,
            tokens: tokenize(text, &lex),
            label,
        };
        Dataset {
            name: tag.into(),
            labels: vec!["pos".into(), "neg".into()],
            train: vec![mk(0, "fine fine", 0), mk(1, "dull dull", 1)],
            test: vec![mk(2, "fine", 0)],
        }
    }

    fn hyper() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch_size: 2,
            learning_rate: 0.5,
            embedding_dim: 4,
            hidden_dim: 4,
            unk_dropout: 0.0,
            min_count: 1,
            max_vocab: 50,
        }
    }

    #[test]
    fn cache_hit_only_when_everything_matches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ModelCache::new(dir.path()).unwrap();
        let spec = ModelSpec::parse_id("linbow-word-rand-1-0").unwrap();
        let data = toy_dataset("a");

        let (first, hit) = cache.load_or_train(&spec, &data, &hyper(), None).unwrap();
        assert!(!hit);
        let (second, hit) = cache.load_or_train(&spec, &data, &hyper(), None).unwrap();
        assert!(hit);
        assert_eq!(
            first.logits(&data.test[0].tokens),
            second.logits(&data.test[0].tokens)
        );

        // Different data: cache must miss.
        let other = toy_dataset("b");
        let (_, hit) = cache.load_or_train(&spec, &other, &hyper(), None).unwrap();
        assert!(!hit);

        // Different hyper: cache must miss.
        let mut h2 = hyper();
        h2.epochs = 6;
        let (_, hit) = cache.load_or_train(&spec, &other, &h2, None).unwrap();
        assert!(!hit);
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = TransferMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![Some((vec![1.0, 0.25], 4)), None],
        );
        let data = toy_dataset("a");
        let key = matrix_key(
            &data,
            &["a".into(), "b".into()],
            &AttackEngine::Pwws,
            &TransferBudget {
                attacked: 4,
                transferred: 4,
                seed: 0,
            },
        );
        store_matrix(dir.path(), &key, &m).unwrap();
        let loaded = load_matrix(dir.path(), &key).unwrap();
        assert_eq!(loaded.model_ids, m.model_ids);
        assert_eq!(loaded.rate(0, 1), Some(0.25));
        assert!(load_matrix(dir.path(), "deadbeef").is_none());
    }
}
