//! The factor-structured model zoo: specs over four factor axes
//! (architecture, input form, embedding initialization, depth), training,
//! logit inference, and word-importance probes.

mod classifier;
mod embed;
mod families;
mod train;
mod vocab;

pub use classifier::{
    substitute_importance, word_importance, Classifier, TextModel, WordImportance,
};
pub use embed::PretrainedEmbeddings;
pub use train::{dataset_fingerprint, train, TrainConfig, TrainReport};
pub use vocab::{char_trigrams, EncodedInput, ZooVocab, PAD_ID, UNK_ID, UNK_SURFACE};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale architecture families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    /// Bag-of-words linear classifier with per-symbol class weights.
    LinearBow,
    /// Averaged embeddings followed by depth-many tanh layers.
    AvgEmbMlp,
    /// Width-3 convolutions over embeddings with max pooling.
    Conv1d,
    /// Stacked simple recurrent cells, classifying from the final state.
    Recurrent,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::LinearBow,
        Architecture::AvgEmbMlp,
        Architecture::Conv1d,
        Architecture::Recurrent,
    ];

    fn tag(self) -> &'static str {
        match self {
            Architecture::LinearBow => "linbow",
            Architecture::AvgEmbMlp => "avgmlp",
            Architecture::Conv1d => "conv1d",
            Architecture::Recurrent => "recur",
        }
    }

    fn parse(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

/// How raw tokens reach the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputForm {
    Word,
    /// Character trigrams of each word, bag-pooled per position.
    CharNgram,
}

impl InputForm {
    pub const ALL: [InputForm; 2] = [InputForm::Word, InputForm::CharNgram];

    fn tag(self) -> &'static str {
        match self {
            InputForm::Word => "word",
            InputForm::CharNgram => "char",
        }
    }

    fn parse(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }
}

/// How embedding-like tables are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmbeddingInit {
    /// Seed-deterministic uniform(-0.1, 0.1).
    Random,
    /// Rows loaded from a pretrained vector file; OOV rows fall back to
    /// the random scheme.
    PretrainedFile,
}

impl EmbeddingInit {
    pub const ALL: [EmbeddingInit; 2] = [EmbeddingInit::Random, EmbeddingInit::PretrainedFile];

    fn tag(self) -> &'static str {
        match self {
            EmbeddingInit::Random => "rand",
            EmbeddingInit::PretrainedFile => "pre",
        }
    }

    fn parse(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.tag() == tag)
    }
}

/// The factor axes a model can vary along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorAxis {
    Architecture,
    InputForm,
    Embedding,
    Capacity,
}

impl FactorAxis {
    pub const ALL: [FactorAxis; 4] = [
        FactorAxis::Architecture,
        FactorAxis::InputForm,
        FactorAxis::Embedding,
        FactorAxis::Capacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactorAxis::Architecture => "architecture",
            FactorAxis::InputForm => "input_form",
            FactorAxis::Embedding => "embedding",
            FactorAxis::Capacity => "capacity",
        }
    }
}

impl fmt::Display for FactorAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FactorAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FactorAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown factor axis {s:?}")))
    }
}

/// A point in the factor grid plus its training seed.
///
/// The canonical id `arch-form-emb-depth-seed` is a pure function of the
/// fields and round-trips through [`ModelSpec::parse_id`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input_form: InputForm,
    pub embedding_init: EmbeddingInit,
    pub depth: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(
        architecture: Architecture,
        input_form: InputForm,
        embedding_init: EmbeddingInit,
        depth: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = ModelSpec {
            architecture,
            input_form,
            embedding_init,
            depth,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config(format!(
                "depth must be >= 1, got {}",
                self.depth
            )));
        }
        if self.input_form == InputForm::CharNgram
            && self.embedding_init == EmbeddingInit::PretrainedFile
        {
            return Err(Error::Config(
                "pretrained vectors are undefined for character n-grams".into(),
            ));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}",
            self.architecture.tag(),
            self.input_form.tag(),
            self.embedding_init.tag(),
            self.depth,
            self.seed
        )
    }

    pub fn parse_id(id: &str) -> Result<Self> {
        let err = || Error::Config(format!("invalid model id {id:?}"));
        let parts: Vec<&str> = id.split('-').collect();
        if parts.len() != 5 {
            return Err(err());
        }
        let spec = ModelSpec {
            architecture: Architecture::parse(parts[0]).ok_or_else(err)?,
            input_form: InputForm::parse(parts[1]).ok_or_else(err)?,
            embedding_init: EmbeddingInit::parse(parts[2]).ok_or_else(err)?,
            depth: parts[3].parse().map_err(|_| err())?,
            seed: parts[4].parse().map_err(|_| err())?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The spec of this model's twin: same factors, next seed.
    pub fn twin(&self) -> ModelSpec {
        ModelSpec {
            seed: self.seed + 1,
            ..*self
        }
    }

    /// The value of the given factor axis, as a comparable tag.
    pub fn axis_value(&self, axis: FactorAxis) -> String {
        match axis {
            FactorAxis::Architecture => self.architecture.tag().to_string(),
            FactorAxis::InputForm => self.input_form.tag().to_string(),
            FactorAxis::Embedding => self.embedding_init.tag().to_string(),
            FactorAxis::Capacity => self.depth.to_string(),
        }
    }

    /// True when two specs share the same seed and differ in exactly the
    /// given axis (all other factor axes equal).
    pub fn differs_only_in(&self, other: &ModelSpec, axis: FactorAxis) -> bool {
        if self.seed != other.seed {
            return false;
        }
        let mut differing = Vec::new();
        for a in FactorAxis::ALL {
            if self.axis_value(a) != other.axis_value(a) {
                differing.push(a);
            }
        }
        differing == [axis]
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Per-axis level lists for [`build_zoo`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorGrid {
    pub architectures: Vec<Architecture>,
    pub input_forms: Vec<InputForm>,
    pub embedding_inits: Vec<EmbeddingInit>,
    pub depths: Vec<usize>,
}

impl FactorGrid {
    /// The default desk grid: every level of every axis.
    pub fn full() -> Self {
        FactorGrid {
            architectures: Architecture::ALL.to_vec(),
            input_forms: InputForm::ALL.to_vec(),
            embedding_inits: EmbeddingInit::ALL.to_vec(),
            depths: vec![1, 2],
        }
    }
}

/// Expand a factor grid and seed list into the deterministic list of valid
/// specs (CharNgram x PretrainedFile combinations are dropped).
pub fn build_zoo(grid: &FactorGrid, seeds: &[u64]) -> Result<Vec<ModelSpec>> {
    if grid.architectures.is_empty()
        || grid.input_forms.is_empty()
        || grid.embedding_inits.is_empty()
        || grid.depths.is_empty()
        || seeds.is_empty()
    {
        return Err(Error::Config("factor grid has an empty axis".into()));
    }
    let mut specs = Vec::new();
    for &arch in &grid.architectures {
        for &form in &grid.input_forms {
            for &emb in &grid.embedding_inits {
                for &depth in &grid.depths {
                    for &seed in seeds {
                        match ModelSpec::new(arch, form, emb, depth, seed) {
                            Ok(spec) => specs.push(spec),
                            Err(_) => continue, // invalid combination dropped
                        }
                    }
                }
            }
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_with_one_seed_has_24_specs() {
        let specs = build_zoo(&FactorGrid::full(), &[0]).unwrap();
        assert_eq!(specs.len(), 24);
        assert!(specs.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn seeds_multiply_specs() {
        let grid = FactorGrid {
            architectures: vec![Architecture::LinearBow],
            input_forms: vec![InputForm::Word],
            embedding_inits: vec![EmbeddingInit::Random],
            depths: vec![1],
        };
        let specs = build_zoo(&grid, &[1, 2]).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].seed, 1);
        assert_eq!(specs[1].seed, 2);
        assert_eq!(specs[0].twin().seed, 2);
    }

    #[test]
    fn empty_axis_rejected() {
        let mut grid = FactorGrid::full();
        grid.depths.clear();
        assert!(build_zoo(&grid, &[0]).is_err());
    }

    #[test]
    fn char_pretrained_is_invalid() {
        assert!(ModelSpec::new(
            Architecture::Conv1d,
            InputForm::CharNgram,
            EmbeddingInit::PretrainedFile,
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn id_round_trips() {
        for spec in build_zoo(&FactorGrid::full(), &[0, 7]).unwrap() {
            assert_eq!(ModelSpec::parse_id(&spec.id()).unwrap(), spec);
        }
    }

    #[test]
    fn differs_only_in_detects_single_axis() {
        let a = ModelSpec::parse_id("linbow-word-rand-1-0").unwrap();
        let b = ModelSpec::parse_id("conv1d-word-rand-1-0").unwrap();
        let c = ModelSpec::parse_id("conv1d-char-rand-1-0").unwrap();
        assert!(a.differs_only_in(&b, FactorAxis::Architecture));
        assert!(!a.differs_only_in(&b, FactorAxis::InputForm));
        assert!(!a.differs_only_in(&c, FactorAxis::Architecture));
        assert!(b.differs_only_in(&c, FactorAxis::InputForm));
    }
}
