//! Deterministic mini-batch gradient-descent training.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, Example};
use crate::error::{Error, Result};
use crate::math::argmax;
use crate::zoo::classifier::Classifier;
use crate::zoo::families::{Dims, Params};
use crate::zoo::vocab::{EncodedInput, ZooVocab};
use crate::zoo::{EmbeddingInit, ModelSpec, PretrainedEmbeddings};

/// Training hyperparameters. These are shared across the zoo; the factor
/// axes live in [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    /// Probability of masking a training token with UNK, so the UNK row is
    /// trained and importance probes are well defined.
    pub unk_dropout: f64,
    pub min_count: usize,
    pub max_vocab: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 12,
            batch_size: 32,
            learning_rate: 0.25,
            embedding_dim: 24,
            hidden_dim: 24,
            unk_dropout: 0.01,
            min_count: 2,
            max_vocab: 30_000,
        }
    }
}

impl TrainConfig {
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

/// Summary of one training run, persisted next to the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub spec_id: String,
    pub label_count: usize,
    pub vocab_rows: usize,
    pub epochs: usize,
    pub loss_curve: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub data_fingerprint: String,
    pub hyper_fingerprint: String,
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a dataset: name, labels, and every example's label and
/// tagged tokens, in order.
pub fn dataset_fingerprint(data: &Dataset) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.name.as_bytes());
    hasher.update([0xff]);
    for label in &data.labels {
        hasher.update(label.as_bytes());
        hasher.update([0xfe]);
    }
    for (tag, split) in [(b'T', &data.train), (b'E', &data.test)] {
        hasher.update([tag]);
        for ex in split {
            hasher.update(ex.id.to_le_bytes());
            hasher.update((ex.label as u64).to_le_bytes());
            for tok in &ex.tokens {
                hasher.update(tok.surface.as_bytes());
                hasher.update([b'/']);
                hasher.update(tok.pos.to_string().as_bytes());
                hasher.update([0xfd]);
            }
            hasher.update([0xfc]);
        }
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn apply_unk_dropout(input: &EncodedInput, p: f64, rng: &mut ChaCha8Rng) -> EncodedInput {
    let mut out = input.clone();
    for i in 0..out.positions() {
        if rng.gen_bool(p) {
            out.mask_position(i);
        }
    }
    out
}

/// Train a classifier. Deterministic: (spec, data, hyper) fully determine
/// the result, including the shuffling and UNK-dropout streams.
pub fn train(
    spec: &ModelSpec,
    data: &Dataset,
    hyper: &TrainConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<Classifier> {
    spec.validate()?;
    if data.label_count() < 2 {
        return Err(Error::TooFewLabels(data.label_count()));
    }
    if data.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if spec.embedding_init == EmbeddingInit::PretrainedFile {
        let emb = pretrained.ok_or_else(|| {
            Error::Config(format!("spec {} needs a pretrained embedding file", spec.id()))
        })?;
        if emb.dim() != hyper.embedding_dim {
            return Err(Error::Config(format!(
                "pretrained dim {} != configured embedding_dim {}",
                emb.dim(),
                hyper.embedding_dim
            )));
        }
    }

    let vocab = ZooVocab::build(
        &data.train,
        spec.input_form,
        hyper.min_count,
        hyper.max_vocab,
    );
    let label_count = data.label_count();
    let dims = Dims {
        emb: hyper.embedding_dim,
        hidden: hyper.hidden_dim,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let symbols = vocab.symbols().to_vec();
    let lookup_row = |row: usize| -> Option<Vec<f64>> {
        pretrained.and_then(|p| p.get(&symbols[row]).map(|v| v.to_vec()))
    };
    let pretrained_row: Option<&dyn Fn(usize) -> Option<Vec<f64>>> =
        match spec.embedding_init {
            EmbeddingInit::PretrainedFile => Some(&lookup_row),
            EmbeddingInit::Random => None,
        };
    let mut params = Params::init(spec, vocab.rows(), label_count, dims, pretrained_row, &mut rng);

    let encoded: Vec<(EncodedInput, usize)> = data
        .train
        .iter()
        .map(|ex| (vocab.encode(&ex.tokens), ex.label))
        .collect();

    let mut loss_curve = Vec::with_capacity(hyper.epochs);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size.max(1)) {
            let mut grad = params.zeros_like();
            for &idx in batch {
                let (input, gold) = &encoded[idx];
                let dropped = apply_unk_dropout(input, hyper.unk_dropout, &mut rng);
                let (loss, _) = params.accumulate(&dropped, *gold, &mut grad);
                epoch_loss += loss;
            }
            params.step(&grad, hyper.learning_rate / batch.len() as f64);
        }
        let mean = epoch_loss / encoded.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                spec_id: spec.id(),
                epoch,
                loss: mean,
            });
        }
        loss_curve.push(mean);
    }

    let accuracy = |examples: &[Example]| -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let correct = examples
            .iter()
            .filter(|ex| {
                let logits = params.forward(&vocab.encode(&ex.tokens));
                argmax(logits.as_slice().unwrap()) == ex.label
            })
            .count();
        correct as f64 / examples.len() as f64
    };
    let report = TrainReport {
        spec_id: spec.id(),
        label_count,
        vocab_rows: vocab.rows(),
        epochs: hyper.epochs,
        loss_curve,
        train_accuracy: accuracy(&data.train),
        test_accuracy: accuracy(&data.test),
        data_fingerprint: dataset_fingerprint(data),
        hyper_fingerprint: hyper.fingerprint(),
    };

    Ok(Classifier::from_parts(
        *spec,
        vocab,
        params,
        label_count,
        dims,
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, PosLexicon};
    use crate::zoo::{Architecture, FactorGrid, InputForm};

    fn toy_dataset() -> Dataset {
        let lex = PosLexicon::new();
        let mk = |id: u64, text: &str, label: usize| Example {
            id,
            tokens: tokenize(text, &lex),
            label,
        };
        Dataset {
            name: "toy".into(),
            labels: vec!["pos".into(), "neg".into()],
            train: vec![
                mk(0, "fine fine film", 0),
                mk(1, "dull dull film", 1),
                mk(2, "fine film fine film", 0),
                mk(3, "dull film dull film", 1),
            ],
            test: vec![mk(4, "fine film", 0), mk(5, "dull film", 1)],
        }
    }

    fn fast_config() -> TrainConfig {
        TrainConfig {
            epochs: 60,
            batch_size: 2,
            learning_rate: 0.5,
            embedding_dim: 8,
            hidden_dim: 8,
            unk_dropout: 0.01,
            min_count: 1,
            max_vocab: 100,
        }
    }

    #[test]
    fn linear_bow_separates_toy_set() {
        let spec = ModelSpec::new(
            Architecture::LinearBow,
            InputForm::Word,
            EmbeddingInit::Random,
            1,
            0,
        )
        .unwrap();
        let clf = train(&spec, &toy_dataset(), &fast_config(), None).unwrap();
        assert_eq!(clf.report().train_accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_dataset();
        let cfg = fast_config();
        for spec in crate::zoo::build_zoo(&FactorGrid::full(), &[42]).unwrap() {
            if spec.embedding_init == EmbeddingInit::PretrainedFile {
                continue;
            }
            let a = train(&spec, &data, &cfg, None).unwrap();
            let b = train(&spec, &data, &cfg, None).unwrap();
            for ex in &data.test {
                assert_eq!(
                    a.logits(&ex.tokens),
                    b.logits(&ex.tokens),
                    "nondeterministic logits for {}",
                    spec.id()
                );
            }
        }
    }

    #[test]
    fn zero_epochs_yields_initialized_model() {
        let mut cfg = fast_config();
        cfg.epochs = 0;
        let spec = ModelSpec::parse_id("linbow-word-rand-1-0").unwrap();
        let clf = train(&spec, &toy_dataset(), &cfg, None).unwrap();
        assert!(clf.report().loss_curve.is_empty());
        let logits = clf.logits(&toy_dataset().test[0].tokens);
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pretrained_without_file_is_config_error() {
        let spec = ModelSpec::parse_id("avgmlp-word-pre-1-0").unwrap();
        let err = train(&spec, &toy_dataset(), &fast_config(), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn seed_twins_share_vocab_and_shapes() {
        let data = toy_dataset();
        let cfg = fast_config();
        let a = train(
            &ModelSpec::parse_id("recur-char-rand-2-1").unwrap(),
            &data,
            &cfg,
            None,
        )
        .unwrap();
        let b = train(
            &ModelSpec::parse_id("recur-char-rand-2-2").unwrap(),
            &data,
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(a.vocab().symbols(), b.vocab().symbols());
        assert_eq!(a.report().vocab_rows, b.report().vocab_rows);
    }
}
