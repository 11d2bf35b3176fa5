//! Trained classifiers: logit inference, importance probes, persistence.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Token};
use crate::error::{Error, Result};
use crate::math::{argmax, log_softmax, softmax};
use crate::zoo::families::{Dims, LinearBow, Params, TensorMut, TensorRef};
use crate::zoo::train::TrainReport;
use crate::zoo::vocab::{ZooVocab, UNK_SURFACE};
use crate::zoo::{Architecture, EmbeddingInit, InputForm, ModelSpec};

/// Anything that maps a token sequence to one logit per class. Attacks and
/// transfer evaluation run against this interface, so hand-built victims
/// and ensembles plug in alongside trained classifiers.
pub trait TextModel: Sync {
    fn label_count(&self) -> usize;
    fn logits(&self, tokens: &[Token]) -> Vec<f64>;

    fn probabilities(&self, tokens: &[Token]) -> Vec<f64> {
        softmax(&self.logits(tokens))
    }

    /// Argmax prediction with lowest-index tie-breaking.
    fn predict(&self, tokens: &[Token]) -> usize {
        argmax(&self.logits(tokens))
    }
}

/// A trained, immutable model instance.
#[derive(Debug, Clone)]
pub struct Classifier {
    spec: ModelSpec,
    vocab: ZooVocab,
    params: Params,
    label_count: usize,
    dims: Dims,
    report: TrainReport,
}

impl Classifier {
    pub(crate) fn from_parts(
        spec: ModelSpec,
        vocab: ZooVocab,
        params: Params,
        label_count: usize,
        dims: Dims,
        report: TrainReport,
    ) -> Self {
        Classifier {
            spec,
            vocab,
            params,
            label_count,
            dims,
            report,
        }
    }

    /// Hand-built bag-of-words linear victim: each word maps to the given
    /// class-weight vector, UNK and PAD contribute nothing. Used by tests
    /// and oracles that need exact, inspectable decision rules.
    pub fn linear_from_weights(words: &[(&str, Vec<f64>)], label_count: usize) -> Classifier {
        Self::linear_from_weights_seeded(words, label_count, 0)
    }

    /// [`Classifier::linear_from_weights`] with a distinct spec seed, so
    /// several hand-built victims can coexist in one ensemble or pool.
    pub fn linear_from_weights_seeded(
        words: &[(&str, Vec<f64>)],
        label_count: usize,
        seed: u64,
    ) -> Classifier {
        assert!(words.iter().all(|(_, w)| w.len() == label_count));
        let mut symbols = vec!["<pad>".to_string(), UNK_SURFACE.to_string()];
        symbols.extend(words.iter().map(|(w, _)| w.to_string()));
        let vocab = ZooVocab::from_symbols(InputForm::Word, symbols);
        let mut w = Array2::zeros((vocab.rows(), label_count));
        for (i, (_, weights)) in words.iter().enumerate() {
            for (c, v) in weights.iter().enumerate() {
                w[[i + 2, c]] = *v;
            }
        }
        let spec = ModelSpec {
            architecture: Architecture::LinearBow,
            input_form: InputForm::Word,
            embedding_init: EmbeddingInit::Random,
            depth: 1,
            seed,
        };
        let params = Params::LinearBow(LinearBow {
            w,
            b: Array1::zeros(label_count),
            extra: Vec::new(),
        });
        let report = TrainReport {
            spec_id: spec.id(),
            label_count,
            vocab_rows: vocab.rows(),
            epochs: 0,
            loss_curve: Vec::new(),
            train_accuracy: 0.0,
            test_accuracy: 0.0,
            data_fingerprint: "hand-built".into(),
            hyper_fingerprint: "hand-built".into(),
        };
        Classifier {
            spec,
            vocab,
            params,
            label_count,
            dims: Dims {
                emb: label_count,
                hidden: label_count,
            },
            report,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn id(&self) -> String {
        self.spec.id()
    }

    pub fn vocab(&self) -> &ZooVocab {
        &self.vocab
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn logits(&self, tokens: &[Token]) -> Vec<f64> {
        let encoded = self.vocab.encode(tokens);
        self.params.forward(&encoded).to_vec()
    }

    pub fn predict(&self, tokens: &[Token]) -> usize {
        argmax(&self.logits(tokens))
    }

    pub fn probabilities(&self, tokens: &[Token]) -> Vec<f64> {
        softmax(&self.logits(tokens))
    }

    /// Persist as a versioned binary weight file (exact f64 round-trip).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let meta = PersistMeta {
            spec_id: self.spec.id(),
            label_count: self.label_count,
            emb_dim: self.dims.emb,
            hidden_dim: self.dims.hidden,
            vocab_form: self.vocab.form(),
            vocab_symbols: self.vocab.symbols().to_vec(),
            report: self.report.clone(),
        };
        let meta_json = serde_json::to_vec(&meta).expect("meta serializes");
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta_json);
        let tensors = self.params.tensor_refs();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            match t {
                TensorRef::Mat(m) => {
                    out.push(2);
                    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
                    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
                    for v in m.iter() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                TensorRef::Vec1(v) => {
                    out.push(1);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v.iter() {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Classifier> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let corrupt = |reason: &str| Error::Other(format!("{}: {reason}", path.display()));
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("not a model file (bad magic)"));
        }
        let mut reader = ByteReader {
            bytes: &bytes,
            pos: MAGIC.len(),
        };
        let meta_len = u32::from_le_bytes(take_bytes(&mut reader, path, 4)?.try_into().unwrap()) as usize;
        let meta: PersistMeta = serde_json::from_slice(take_bytes(&mut reader, path, meta_len)?)
            .map_err(|e| corrupt(&format!("bad metadata: {e}")))?;
        let spec = ModelSpec::parse_id(&meta.spec_id)?;
        let vocab = ZooVocab::from_symbols(meta.vocab_form, meta.vocab_symbols);
        let dims = Dims {
            emb: meta.emb_dim,
            hidden: meta.hidden_dim,
        };
        // Template with the right shapes; every tensor is overwritten below.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = Params::init(&spec, vocab.rows(), meta.label_count, dims, None, &mut rng);
        let tensor_count = u32::from_le_bytes(take_bytes(&mut reader, path, 4)?.try_into().unwrap()) as usize;
        let muts = params.tensor_muts();
        if tensor_count != muts.len() {
            return Err(corrupt("tensor count mismatch"));
        }
        for t in muts {
            let ndim = take_bytes(&mut reader, path, 1)?[0];
            match (ndim, t) {
                (2, TensorMut::Mat(m)) => {
                    let rows =
                        u64::from_le_bytes(take_bytes(&mut reader, path, 8)?.try_into().unwrap()) as usize;
                    let cols =
                        u64::from_le_bytes(take_bytes(&mut reader, path, 8)?.try_into().unwrap()) as usize;
                    if (rows, cols) != (m.nrows(), m.ncols()) {
                        return Err(corrupt("tensor shape mismatch"));
                    }
                    for v in m.iter_mut() {
                        *v = f64::from_le_bytes(take_bytes(&mut reader, path, 8)?.try_into().unwrap());
                    }
                }
                (1, TensorMut::Vec1(v)) => {
                    let len =
                        u64::from_le_bytes(take_bytes(&mut reader, path, 8)?.try_into().unwrap()) as usize;
                    if len != v.len() {
                        return Err(corrupt("tensor shape mismatch"));
                    }
                    for x in v.iter_mut() {
                        *x = f64::from_le_bytes(take_bytes(&mut reader, path, 8)?.try_into().unwrap());
                    }
                }
                _ => return Err(corrupt("tensor kind mismatch")),
            }
        }
        Ok(Classifier {
            spec,
            vocab,
            params,
            label_count: meta.label_count,
            dims,
            report: meta.report,
        })
    }
}

const MAGIC: &[u8] = b"TLABMDL1";

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return None;
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }
}

fn take_bytes<'a>(r: &mut ByteReader<'a>, path: &Path, n: usize) -> Result<&'a [u8]> {
    r.take(n)
        .ok_or_else(|| Error::Other(format!("{}: truncated model file", path.display())))
}

#[derive(Serialize, Deserialize)]
struct PersistMeta {
    spec_id: String,
    label_count: usize,
    emb_dim: usize,
    hidden_dim: usize,
    vocab_form: InputForm,
    vocab_symbols: Vec<String>,
    report: TrainReport,
}

impl TextModel for Classifier {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn logits(&self, tokens: &[Token]) -> Vec<f64> {
        Classifier::logits(self, tokens)
    }
}

/// Per-position importance scores aligned with an example's tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct WordImportance {
    pub scores: Vec<f64>,
}

fn gold_log_prob(model: &dyn TextModel, tokens: &[Token], gold: usize) -> f64 {
    log_softmax(&model.logits(tokens))[gold]
}

/// Importance of each original word: the drop in gold log-likelihood when
/// the word is masked with the unknown symbol.
pub fn word_importance(model: &dyn TextModel, example: &Example) -> WordImportance {
    let base = gold_log_prob(model, &example.tokens, example.label);
    let mut masked = example.tokens.clone();
    let scores = (0..example.tokens.len())
        .map(|i| {
            let original = std::mem::replace(&mut masked[i].surface, UNK_SURFACE.to_string());
            let lp = gold_log_prob(model, &masked, example.label);
            masked[i].surface = original;
            base - lp
        })
        .collect();
    WordImportance { scores }
}

/// Importance of a substitute word: the drop in gold log-likelihood when it
/// replaces the original at `position`.
pub fn substitute_importance(
    model: &dyn TextModel,
    example: &Example,
    position: usize,
    substitute: &str,
) -> f64 {
    let base = gold_log_prob(model, &example.tokens, example.label);
    let mut perturbed = example.tokens.clone();
    perturbed[position].surface = substitute.to_string();
    base - gold_log_prob(model, &perturbed, example.label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Pos;

    fn tokens(words: &[&str]) -> Vec<Token> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                surface: w.to_string(),
                pos: Pos::Adj,
                position: i,
            })
            .collect()
    }

    fn example(words: &[&str], label: usize) -> Example {
        Example {
            id: 0,
            tokens: tokens(words),
            label,
        }
    }

    #[test]
    fn hand_set_weights_give_hand_computed_logits() {
        let clf = Classifier::linear_from_weights(&[("fine", vec![1.0, -1.0])], 2);
        assert_eq!(clf.logits(&tokens(&["fine"])), vec![1.0, -1.0]);
        assert_eq!(clf.predict(&tokens(&["fine"])), 0);
    }

    #[test]
    fn bag_of_words_is_order_invariant() {
        let clf = Classifier::linear_from_weights(
            &[("fine", vec![1.0, -1.0]), ("dull", vec![-0.5, 0.5])],
            2,
        );
        assert_eq!(
            clf.logits(&tokens(&["fine", "dull"])),
            clf.logits(&tokens(&["dull", "fine"]))
        );
    }

    #[test]
    fn empty_input_is_defined() {
        let clf = Classifier::linear_from_weights(&[("fine", vec![1.0, -1.0])], 2);
        let logits = clf.logits(&[]);
        assert_eq!(logits.len(), 2);
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn importance_of_supporting_word_is_positive() {
        let clf = Classifier::linear_from_weights(
            &[("fine", vec![2.0, -2.0]), ("film", vec![0.0, 0.0])],
            2,
        );
        let ex = example(&["fine", "film"], 0);
        let imp = word_importance(&clf, &ex);
        assert!(imp.scores[0] > 0.0, "gold-supporting word should matter");
        assert!(
            imp.scores[1].abs() < 1e-12,
            "zero-weight word should not matter"
        );
    }

    #[test]
    fn substitute_importance_identity_is_zero() {
        let clf = Classifier::linear_from_weights(&[("fine", vec![1.0, -1.0])], 2);
        let ex = example(&["fine"], 0);
        assert_eq!(substitute_importance(&clf, &ex, 0, "fine"), 0.0);
    }

    #[test]
    fn substitute_importance_for_damaging_swap_is_positive() {
        let clf = Classifier::linear_from_weights(
            &[("fine", vec![2.0, -2.0]), ("dull", vec![-2.0, 2.0])],
            2,
        );
        let ex = example(&["fine"], 0);
        assert!(substitute_importance(&clf, &ex, 0, "dull") > 0.0);
        // OOV substitutes map to UNK and stay finite.
        assert!(substitute_importance(&clf, &ex, 0, "zzxqv").is_finite());
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let clf = Classifier::linear_from_weights(
            &[("fine", vec![0.25, -1.5]), ("dull", vec![-0.125, 2.0])],
            2,
        );
        let path = dir.path().join("m.model");
        clf.save(&path).unwrap();
        let loaded = Classifier::load(&path).unwrap();
        let probe = tokens(&["fine", "dull", "zzxqv"]);
        assert_eq!(clf.logits(&probe), loaded.logits(&probe));
        assert_eq!(loaded.id(), clf.id());
    }
}
