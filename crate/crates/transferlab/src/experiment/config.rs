//! Declarative experiment configuration: one TOML file drives every
//! subcommand; CLI flags override individual keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::GaConfig;
use crate::ensemble::SearchConfig;
use crate::error::{Error, Result};
use crate::transfer::{AttackEngine, TransferBudget};
use crate::zoo::{Architecture, EmbeddingInit, FactorGrid, InputForm, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub lexicon: LexiconSection,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub zoo: ZooSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub budgets: BudgetSection,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub rules: RulesSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Corpus directory (train.tsv/test.tsv/labels.txt) or a single file.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSection {
    pub synonyms: PathBuf,
    pub pos: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZooSection {
    pub architectures: Vec<Architecture>,
    pub input_forms: Vec<InputForm>,
    pub embedding_inits: Vec<EmbeddingInit>,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Models below this test accuracy are excluded from the pool.
    pub admission_floor: f64,
}

impl Default for ZooSection {
    fn default() -> Self {
        let grid = FactorGrid::full();
        ZooSection {
            architectures: grid.architectures,
            input_forms: grid.input_forms,
            embedding_inits: grid.embedding_inits,
            depths: grid.depths,
            seeds: vec![0],
            admission_floor: 0.75,
        }
    }
}

impl ZooSection {
    pub fn grid(&self) -> FactorGrid {
        FactorGrid {
            architectures: self.architectures.clone(),
            input_forms: self.input_forms.clone(),
            embedding_inits: self.embedding_inits.clone(),
            depths: self.depths.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// "pwws" or "ga".
    pub engine: String,
    pub ga: GaConfig,
    /// Victim spec id for the `attack` subcommand; defaults to the first
    /// admitted zoo model.
    pub victim: Option<String>,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            engine: "pwws".into(),
            ga: GaConfig::default(),
            victim: None,
        }
    }
}

impl AttackSection {
    pub fn engine(&self) -> Result<AttackEngine> {
        match self.engine.as_str() {
            "pwws" => Ok(AttackEngine::Pwws),
            "ga" => Ok(AttackEngine::Ga(self.ga)),
            other => Err(Error::Config(format!(
                "attack.engine must be \"pwws\" or \"ga\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub attacked: usize,
    pub transferred: usize,
    pub seed: u64,
    /// Modified-word budgets for rule evaluation.
    pub rho_list: Vec<f64>,
    /// Ensemble sizes for the sweep.
    pub ensemble_sizes: Vec<usize>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            attacked: 200,
            transferred: 100,
            seed: 17,
            rho_list: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            ensemble_sizes: vec![2, 3, 4, 5, 6, 7],
        }
    }
}

impl BudgetSection {
    pub fn transfer_budget(&self) -> TransferBudget {
        TransferBudget {
            attacked: self.attacked,
            transferred: self.transferred,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulesSection {
    /// Rules with fewer supporting events are dropped.
    pub min_support: u64,
    /// Fixed ensemble member ids for mining; when empty the genetic
    /// search picks the members.
    pub ensemble_members: Vec<String>,
    /// Cap on test examples used for rule evaluation (0 = all).
    pub eval_examples: usize,
    /// Hold ensemble members out of the realized-transfer evaluation.
    pub exclude_members: bool,
}

impl Default for RulesSection {
    fn default() -> Self {
        RulesSection {
            min_support: 1,
            ensemble_members: Vec::new(),
            eval_examples: 500,
            exclude_members: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Flag-level overrides applied after the file parse.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Parse a TOML config file and apply overrides. Output directory
    /// resolution order: `--out` flag, `TRANSFERLAB_OUT` env var, the
    /// config's `output.dir`, then `./out`.
    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Paths in the file are relative to the file's directory.
        if let Some(base) = path.parent() {
            config.dataset.path = rebase(base, &config.dataset.path);
            config.lexicon.synonyms = rebase(base, &config.lexicon.synonyms);
            config.lexicon.pos = rebase(base, &config.lexicon.pos);
            if let Some(emb) = &config.embeddings {
                config.embeddings = Some(rebase(base, emb));
            }
            if let Some(dir) = &config.output.dir {
                config.output.dir = Some(rebase(base, dir));
            }
        }
        if let Some(out) = &overrides.out {
            config.output.dir = Some(out.clone());
        } else if let Ok(env_out) = std::env::var("TRANSFERLAB_OUT") {
            if !env_out.is_empty() {
                config.output.dir = Some(PathBuf::from(env_out));
            }
        }
        if let Some(seed) = overrides.seed {
            config.budgets.seed = seed;
            config.search.seed = seed;
            config.attack.ga.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("dataset.path", &self.dataset.path),
            ("lexicon.synonyms", &self.lexicon.synonyms),
            ("lexicon.pos", &self.lexicon.pos),
        ] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} does not exist: {}",
                    path.display()
                )));
            }
        }
        if let Some(emb) = &self.embeddings {
            if !emb.exists() {
                return Err(Error::Config(format!(
                    "embeddings file does not exist: {}",
                    emb.display()
                )));
            }
        }
        if self.embeddings.is_none()
            && self
                .zoo
                .embedding_inits
                .contains(&EmbeddingInit::PretrainedFile)
        {
            return Err(Error::Config(
                "zoo includes PretrainedFile but no [embeddings] path is set".into(),
            ));
        }
        self.attack.engine()?;
        self.budgets.transfer_budget().validate()?;
        if !(0.0..=1.0).contains(&self.zoo.admission_floor) {
            return Err(Error::Config("zoo.admission_floor must be in [0, 1]".into()));
        }
        for rho in &self.budgets.rho_list {
            if !(0.0..=1.0).contains(rho) {
                return Err(Error::Config(format!("rho {rho} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Stable content hash of the whole configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn rebase(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_minimal_assets(dir: &Path) {
        fs::create_dir_all(dir.join("corpus")).unwrap();
        fs::write(dir.join("corpus/train.tsv"), "pos\tfine\nneg\tdull\n").unwrap();
        fs::write(dir.join("syn.tsv"), "fine\tADJ\tdecent\n").unwrap();
        fs::write(dir.join("pos.tsv"), "fine\tADJ\n").unwrap();
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_assets(dir.path());
        let mut f = fs::File::create(dir.path().join("exp.toml")).unwrap();
        writeln!(
            f,
            "[dataset]\npath = \"corpus\"\n[lexicon]\nsynonyms = \"syn.tsv\"\npos = \"pos.tsv\"\n[zoo]\nembedding_inits = [\"Random\"]\n"
        )
        .unwrap();
        drop(f);
        let cfg =
            ExperimentConfig::load(dir.path().join("exp.toml"), &Overrides::default()).unwrap();
        assert_eq!(cfg.budgets.attacked, 200);
        assert_eq!(cfg.zoo.seeds, vec![0]);
        assert_eq!(cfg.attack.engine().unwrap(), AttackEngine::Pwws);
        assert!(cfg.dataset.path.ends_with("corpus"));
    }

    #[test]
    fn missing_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_assets(dir.path());
        fs::write(
            dir.path().join("exp.toml"),
            "[dataset]\npath = \"nope\"\n[lexicon]\nsynonyms = \"syn.tsv\"\npos = \"pos.tsv\"\n",
        )
        .unwrap();
        let err = ExperimentConfig::load(dir.path().join("exp.toml"), &Overrides::default())
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn seed_override_applies_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_assets(dir.path());
        fs::write(
            dir.path().join("exp.toml"),
            "[dataset]\npath = \"corpus\"\n[lexicon]\nsynonyms = \"syn.tsv\"\npos = \"pos.tsv\"\n[zoo]\nembedding_inits = [\"Random\"]\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(
            dir.path().join("exp.toml"),
            &Overrides {
                seed: Some(99),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.budgets.seed, 99);
        assert_eq!(cfg.search.seed, 99);
        assert_eq!(cfg.attack.ga.seed, 99);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_assets(dir.path());
        fs::write(
            dir.path().join("exp.toml"),
            "[dataset]\npath = \"corpus\"\ntypo = 1\n[lexicon]\nsynonyms = \"syn.tsv\"\npos = \"pos.tsv\"\n",
        )
        .unwrap();
        assert!(
            ExperimentConfig::load(dir.path().join("exp.toml"), &Overrides::default()).is_err()
        );
    }

    #[test]
    fn config_hash_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_assets(dir.path());
        fs::write(
            dir.path().join("exp.toml"),
            "[dataset]\npath = \"corpus\"\n[lexicon]\nsynonyms = \"syn.tsv\"\npos = \"pos.tsv\"\n[zoo]\nembedding_inits = [\"Random\"]\n",
        )
        .unwrap();
        let a = ExperimentConfig::load(dir.path().join("exp.toml"), &Overrides::default())
            .unwrap()
            .hash();
        let b = ExperimentConfig::load(dir.path().join("exp.toml"), &Overrides::default())
            .unwrap()
            .hash();
        assert_eq!(a, b);
    }
}
