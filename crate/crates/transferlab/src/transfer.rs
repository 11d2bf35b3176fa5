//! Transfer measurement: pairwise rates between models, twin-based base
//! rates, factor-significance scores, and class-level aggregates.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{ga_attack, pwws_attack, GaConfig};
use crate::corpus::{Dataset, Example, Token};
use crate::error::{Error, Result};
use crate::lexicon::SynonymLexicon;
use crate::math::mix_seed;
use crate::zoo::{train, Classifier, FactorAxis, ModelSpec, PretrainedEmbeddings, TextModel, TrainConfig};

/// Which attack generates the adversarial sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttackEngine {
    Pwws,
    Ga(GaConfig),
}

impl AttackEngine {
    pub fn name(&self) -> &'static str {
        match self {
            AttackEngine::Pwws => "pwws",
            AttackEngine::Ga(_) => "ga",
        }
    }
}

/// Attack and evaluation budget: how many test examples to attack per
/// source and how many successes to transfer to each target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferBudget {
    pub attacked: usize,
    pub transferred: usize,
    pub seed: u64,
}

impl TransferBudget {
    pub fn validate(&self) -> Result<()> {
        if self.attacked == 0 {
            return Err(Error::Config("budget.attacked must be > 0".into()));
        }
        if self.transferred > self.attacked {
            return Err(Error::Config(format!(
                "budget.transferred ({}) exceeds budget.attacked ({})",
                self.transferred, self.attacked
            )));
        }
        Ok(())
    }
}

/// One adversarial example ready for transfer evaluation.
pub type AdversarialSet = Vec<(Vec<Token>, usize)>;

/// Dense pairwise transfer rates. A source whose attack produced zero
/// successes has a missing row (recorded, excluded from aggregates).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub model_ids: Vec<String>,
    rows: Vec<Option<MatrixRow>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRow {
    rates: Vec<f64>,
    sample_size: usize,
}

impl TransferMatrix {
    pub fn from_rows(model_ids: Vec<String>, rows: Vec<Option<(Vec<f64>, usize)>>) -> Self {
        assert_eq!(model_ids.len(), rows.len());
        let rows = rows
            .into_iter()
            .map(|r| {
                r.map(|(rates, sample_size)| {
                    assert_eq!(rates.len(), model_ids.len());
                    MatrixRow { rates, sample_size }
                })
            })
            .collect();
        TransferMatrix { model_ids, rows }
    }

    pub fn len(&self) -> usize {
        self.model_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == id)
    }

    /// r(source, target), or None when the source row is missing.
    pub fn rate(&self, source: usize, target: usize) -> Option<f64> {
        self.rows[source].as_ref().map(|r| r.rates[target])
    }

    pub fn row_present(&self, source: usize) -> bool {
        self.rows[source].is_some()
    }

    pub fn sample_size(&self, source: usize) -> Option<usize> {
        self.rows[source].as_ref().map(|r| r.sample_size)
    }

    /// Mean of all off-diagonal rates with present rows.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in 0..self.len() {
            for t in 0..self.len() {
                if s == t {
                    continue;
                }
                if let Some(r) = self.rate(s, t) {
                    sum += r;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean incoming rate for a target over all other sources.
    pub fn mean_incoming(&self, target: usize) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in 0..self.len() {
            if s == target {
                continue;
            }
            if let Some(r) = self.rate(s, target) {
                sum += r;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// CSV with model ids as first row and column; 6-decimal cells,
    /// missing rows as NA.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source");
        for id in &self.model_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (s, id) in self.model_ids.iter().enumerate() {
            out.push_str(id);
            for t in 0..self.len() {
                out.push(',');
                match self.rate(s, t) {
                    Some(r) => out.push_str(&format!("{r:.6}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<TransferMatrix> {
        let bad = |reason: &str| Error::Other(format!("transfer matrix csv: {reason}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let model_ids: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        if model_ids.is_empty() {
            return Err(bad("no model ids"));
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let _source = fields.next().ok_or_else(|| bad("missing row id"))?;
            let cells: Vec<&str> = fields.collect();
            if cells.len() != model_ids.len() {
                return Err(bad("ragged row"));
            }
            if cells.iter().all(|c| *c == "NA") {
                rows.push(None);
            } else {
                let rates: std::result::Result<Vec<f64>, _> =
                    cells.iter().map(|c| c.parse::<f64>()).collect();
                rows.push(Some(MatrixRow {
                    rates: rates.map_err(|_| bad("non-numeric cell"))?,
                    sample_size: 0,
                }));
            }
        }
        if rows.len() != model_ids.len() {
            return Err(bad("row count != id count"));
        }
        Ok(TransferMatrix { model_ids, rows })
    }
}

/// Fraction of an adversarial set the target misclassifies.
pub fn transfer_rate(set: &AdversarialSet, target: &dyn TextModel) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyAdversarialSet);
    }
    let wrong = set
        .iter()
        .filter(|(tokens, gold)| target.predict(tokens) != *gold)
        .count();
    Ok(wrong as f64 / set.len() as f64)
}

/// Deterministically sample `count` attack targets from the test split.
pub fn sample_attack_examples<'a>(
    data: &'a Dataset,
    count: usize,
    seed: u64,
) -> Vec<&'a Example> {
    let mut indices: Vec<usize> = (0..data.test.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5a3f));
    indices.shuffle(&mut rng);
    indices.truncate(count);
    indices.into_iter().map(|i| &data.test[i]).collect()
}

fn run_attack(
    victim: &dyn TextModel,
    example: &Example,
    lexicon: &SynonymLexicon,
    engine: &AttackEngine,
    budget_seed: u64,
) -> Result<crate::attack::AdversarialResult> {
    match engine {
        AttackEngine::Pwws => Ok(pwws_attack(victim, example, lexicon)),
        AttackEngine::Ga(cfg) => {
            let per_example = GaConfig {
                seed: mix_seed(mix_seed(budget_seed, cfg.seed), example.id),
                ..*cfg
            };
            ga_attack(victim, example, lexicon, &per_example)
        }
    }
}

/// Attack the budgeted sample of test examples with `victim` as the local
/// model and keep a seed-sampled subset of the successes.
///
/// Attacks across examples run in parallel; results are reduced in example
/// order so the outcome is independent of the worker count.
pub fn generate_adversarial_set(
    victim: &dyn TextModel,
    data: &Dataset,
    lexicon: &SynonymLexicon,
    engine: &AttackEngine,
    budget: &TransferBudget,
) -> Result<AdversarialSet> {
    budget.validate()?;
    let examples = sample_attack_examples(data, budget.attacked, budget.seed);
    let results: Result<Vec<_>> = examples
        .par_iter()
        .map(|ex| run_attack(victim, ex, lexicon, engine, budget.seed))
        .collect();
    let mut successes: AdversarialSet = results?
        .into_iter()
        .filter(|r| r.success)
        .map(|r| {
            let gold = examples
                .iter()
                .find(|e| e.id == r.example_id)
                .expect("attacked example")
                .label;
            (r.perturbed, gold)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(budget.seed, 0xc9e));
    successes.shuffle(&mut rng);
    successes.truncate(budget.transferred);
    Ok(successes)
}

/// Build the full pairwise matrix: one adversarial set per source, reused
/// for every target.
pub fn build_transfer_matrix(
    models: &[Arc<Classifier>],
    data: &Dataset,
    lexicon: &SynonymLexicon,
    engine: &AttackEngine,
    budget: &TransferBudget,
) -> Result<TransferMatrix> {
    budget.validate()?;
    let model_ids: Vec<String> = models.iter().map(|m| m.id()).collect();
    let sets: Result<Vec<AdversarialSet>> = models
        .par_iter()
        .map(|source| generate_adversarial_set(source.as_ref(), data, lexicon, engine, budget))
        .collect();
    let sets = sets?;
    let mut rows = Vec::with_capacity(models.len());
    for set in &sets {
        if set.is_empty() {
            rows.push(None);
            continue;
        }
        let rates: Result<Vec<f64>> = models
            .par_iter()
            .map(|target| transfer_rate(set, target.as_ref()))
            .collect();
        rows.push(Some((rates?, set.len())));
    }
    Ok(TransferMatrix::from_rows(model_ids, rows))
}

/// Train the twin of `target` (same factors, seed+1), attack it, and
/// measure how its adversarial examples transfer to `target`.
pub fn base_rate_against(
    target: &Classifier,
    data: &Dataset,
    lexicon: &SynonymLexicon,
    engine: &AttackEngine,
    budget: &TransferBudget,
    hyper: &TrainConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<f64> {
    let twin = train(&target.spec().twin(), data, hyper, pretrained)?;
    let set = generate_adversarial_set(&twin, data, lexicon, engine, budget)?;
    if set.is_empty() {
        return Err(Error::EmptyAdversarialSet);
    }
    transfer_rate(&set, target)
}

/// Twin-based base transferability rate for a spec: trains both instances.
pub fn base_transfer_rate(
    spec: &ModelSpec,
    data: &Dataset,
    lexicon: &SynonymLexicon,
    engine: &AttackEngine,
    budget: &TransferBudget,
    hyper: &TrainConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<f64> {
    let target = train(spec, data, hyper, pretrained)?;
    base_rate_against(&target, data, lexicon, engine, budget, hyper, pretrained)
}

/// Per-factor significance scores plus the base rates they subtract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorReport {
    /// axis name -> mean of |r(source, target) - base(target)| over pairs
    /// differing in exactly that axis.
    pub scores: BTreeMap<String, f64>,
    /// model id -> twin base rate.
    pub base_rates: BTreeMap<String, f64>,
    /// axis name -> number of contributing (source, target) pairs.
    pub pair_counts: BTreeMap<String, usize>,
}

/// Mean absolute subtracted transfer rate for one factor axis.
pub fn factor_significance(
    matrix: &TransferMatrix,
    base_rates: &BTreeMap<String, f64>,
    axis: FactorAxis,
) -> Result<f64> {
    let specs: Result<Vec<ModelSpec>> = matrix
        .model_ids
        .iter()
        .map(|id| ModelSpec::parse_id(id))
        .collect();
    let specs = specs?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (s, source_spec) in specs.iter().enumerate() {
        for (t, target_spec) in specs.iter().enumerate() {
            if s == t || !source_spec.differs_only_in(target_spec, axis) {
                continue;
            }
            let (Some(rate), Some(base)) = (
                matrix.rate(s, t),
                base_rates.get(&matrix.model_ids[t]).copied(),
            ) else {
                continue; // missing rows/bases are excluded, not zero-filled
            };
            sum += (rate - base).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoFactorPairs(axis.name().to_string()));
    }
    Ok(sum / n as f64)
}

/// Full factor report over all four axes.
pub fn factor_report(
    matrix: &TransferMatrix,
    base_rates: &BTreeMap<String, f64>,
) -> Result<FactorReport> {
    let mut scores = BTreeMap::new();
    let mut pair_counts = BTreeMap::new();
    for axis in FactorAxis::ALL {
        let score = factor_significance(matrix, base_rates, axis)?;
        scores.insert(axis.name().to_string(), score);
        pair_counts.insert(axis.name().to_string(), count_pairs(matrix, base_rates, axis));
    }
    Ok(FactorReport {
        scores,
        base_rates: base_rates.clone(),
        pair_counts,
    })
}

fn count_pairs(
    matrix: &TransferMatrix,
    base_rates: &BTreeMap<String, f64>,
    axis: FactorAxis,
) -> usize {
    let specs: Vec<ModelSpec> = matrix
        .model_ids
        .iter()
        .filter_map(|id| ModelSpec::parse_id(id).ok())
        .collect();
    let mut n = 0;
    for (s, ss) in specs.iter().enumerate() {
        for (t, ts) in specs.iter().enumerate() {
            if s != t
                && ss.differs_only_in(ts, axis)
                && matrix.rate(s, t).is_some()
                && base_rates.contains_key(&matrix.model_ids[t])
            {
                n += 1;
            }
        }
    }
    n
}

/// Class-level aggregate of a transfer matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMatrix {
    pub classes: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ClassMatrix {
    pub fn cell(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, c) in self.classes.iter().enumerate() {
            out.push_str(c);
            for j in 0..self.classes.len() {
                out.push(',');
                match self.cells[i][j] {
                    Some(v) => out.push_str(&format!("{v:.6}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Average rates over model classes. Within a class cell, only pairs where
/// source and target are the same instance are excluded.
pub fn class_level_matrix(
    matrix: &TransferMatrix,
    grouping: &BTreeMap<String, String>,
) -> Result<ClassMatrix> {
    for id in &matrix.model_ids {
        if !grouping.contains_key(id) {
            return Err(Error::Config(format!("model {id} has no class assignment")));
        }
    }
    let mut classes: Vec<String> = grouping.values().cloned().collect();
    classes.sort();
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|class| {
            (0..matrix.len())
                .filter(|i| grouping[&matrix.model_ids[*i]] == *class)
                .collect()
        })
        .collect();
    if let Some(pos) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(classes[pos].clone()));
    }
    let mut cells = vec![vec![None; classes.len()]; classes.len()];
    for (i, sources) in members.iter().enumerate() {
        for (j, targets) in members.iter().enumerate() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &s in sources {
                for &t in targets {
                    if s == t {
                        continue; // same instance
                    }
                    if let Some(r) = matrix.rate(s, t) {
                        sum += r;
                        n += 1;
                    }
                }
            }
            if n > 0 {
                cells[i][j] = Some(sum / n as f64);
            }
        }
    }
    Ok(ClassMatrix { classes, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::testutil::{adj_example, adj_tokens};
    use crate::corpus::Pos;
    use crate::zoo::Classifier;

    fn matrix(ids: &[&str], rows: &[Option<Vec<f64>>]) -> TransferMatrix {
        TransferMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.clone().map(|rates| (rates, 10)))
                .collect(),
        )
    }

    #[test]
    fn transfer_rate_counts_misclassifications() {
        let target = Classifier::linear_from_weights(
            &[("fine", vec![1.0, 0.0]), ("dull", vec![0.0, 1.0])],
            2,
        );
        let set: AdversarialSet = vec![
            (adj_tokens(&["fine"]), 0), // correct -> not transferred
            (adj_tokens(&["fine"]), 1), // wrong -> transferred
            (adj_tokens(&["dull"]), 0), // wrong
            (adj_tokens(&["dull"]), 1), // correct
        ];
        assert_eq!(transfer_rate(&set, &target).unwrap(), 0.5);
        let all_wrong: AdversarialSet = vec![
            (adj_tokens(&["fine"]), 1),
            (adj_tokens(&["fine"]), 1),
            (adj_tokens(&["dull"]), 0),
            (adj_tokens(&["dull"]), 0),
        ];
        assert_eq!(transfer_rate(&all_wrong, &target).unwrap(), 1.0);
        assert!(transfer_rate(&Vec::new(), &target).is_err());
    }

    #[test]
    fn identical_models_transfer_perfectly() {
        // Two identical instances: everything that fools one fools the other.
        let weights = [
            ("fine", vec![2.0, 0.0]),
            ("dull", vec![0.0, 2.0]),
            ("meh", vec![0.0, 2.5]),
        ];
        let a = Classifier::linear_from_weights(&weights, 2);
        let b = Classifier::linear_from_weights(&weights, 2);
        let mut lexicon = SynonymLexicon::new();
        lexicon.add_entry("fine", Pos::Adj, ["meh"]);

        let data = Dataset {
            name: "toy".into(),
            labels: vec!["pos".into(), "neg".into()],
            train: vec![],
            test: (0..8)
                .map(|i| adj_example(i, &["fine", "fine"], 0))
                .collect(),
        };
        let budget = TransferBudget {
            attacked: 8,
            transferred: 8,
            seed: 7,
        };
        let set =
            generate_adversarial_set(&a, &data, &lexicon, &AttackEngine::Pwws, &budget).unwrap();
        assert!(!set.is_empty());
        assert_eq!(transfer_rate(&set, &a).unwrap(), 1.0);
        assert_eq!(transfer_rate(&set, &b).unwrap(), 1.0);
    }

    #[test]
    fn factor_significance_matches_hand_computation() {
        // Two specs differing only in capacity.
        let ids = ["linbow-word-rand-1-0", "linbow-word-rand-2-0"];
        let m = matrix(
            &ids,
            &[Some(vec![1.0, 0.6]), Some(vec![0.8, 1.0])],
        );
        let mut base = BTreeMap::new();
        base.insert(ids[0].to_string(), 0.9); // |0.8 - 0.9| = 0.1
        base.insert(ids[1].to_string(), 0.9); // |0.6 - 0.9| = 0.3
        let score = factor_significance(&m, &base, FactorAxis::Capacity).unwrap();
        assert!((score - 0.2).abs() < 1e-12);
        assert!(matches!(
            factor_significance(&m, &base, FactorAxis::InputForm),
            Err(Error::NoFactorPairs(_))
        ));
    }

    #[test]
    fn factor_significance_zero_when_rates_equal_base() {
        let ids = ["linbow-word-rand-1-0", "conv1d-word-rand-1-0"];
        let m = matrix(&ids, &[Some(vec![1.0, 0.7]), Some(vec![0.7, 1.0])]);
        let mut base = BTreeMap::new();
        base.insert(ids[0].to_string(), 0.7);
        base.insert(ids[1].to_string(), 0.7);
        let score = factor_significance(&m, &base, FactorAxis::Architecture).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn missing_rows_are_excluded_not_zero_filled() {
        let ids = ["linbow-word-rand-1-0", "linbow-word-rand-2-0"];
        let m = matrix(&ids, &[None, Some(vec![0.5, 1.0])]);
        let mut base = BTreeMap::new();
        base.insert(ids[0].to_string(), 0.9);
        base.insert(ids[1].to_string(), 0.9);
        // Only the pair (source=1, target=0) contributes: |0.5-0.9|.
        let score = factor_significance(&m, &base, FactorAxis::Capacity).unwrap();
        assert!((score - 0.4).abs() < 1e-12);
    }

    #[test]
    fn class_matrix_averages_and_excludes_self_pairs() {
        let ids = ["a1", "a2", "b1"];
        let grouping: BTreeMap<String, String> = [
            ("a1", "A"),
            ("a2", "A"),
            ("b1", "B"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let m = matrix(
            &ids,
            &[
                Some(vec![1.0, 0.4, 0.4]),
                Some(vec![0.6, 1.0, 0.2]),
                Some(vec![0.5, 0.3, 1.0]),
            ],
        );
        let cm = class_level_matrix(&m, &grouping).unwrap();
        assert_eq!(cm.classes, ["A", "B"]);
        // A->A: mean of r(a1,a2)=0.4 and r(a2,a1)=0.6 (self pairs excluded)
        assert!((cm.cell(0, 0).unwrap() - 0.5).abs() < 1e-12);
        // A->B: mean of 0.4 and 0.2
        assert!((cm.cell(0, 1).unwrap() - 0.3).abs() < 1e-12);
        // B->A: mean of 0.5 and 0.3
        assert!((cm.cell(1, 0).unwrap() - 0.4).abs() < 1e-12);
        // B->B: only the self pair, excluded
        assert_eq!(cm.cell(1, 1), None);
    }

    #[test]
    fn single_member_class_cells_match_rates() {
        let ids = ["s1", "t1"];
        let grouping: BTreeMap<String, String> = [("s1", "A"), ("t1", "B")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let m = matrix(&ids, &[Some(vec![1.0, 0.4]), Some(vec![0.7, 1.0])]);
        let cm = class_level_matrix(&m, &grouping).unwrap();
        assert_eq!(cm.cell(0, 1), Some(0.4));
        assert_eq!(cm.cell(1, 0), Some(0.7));
    }

    #[test]
    fn csv_round_trips() {
        let ids = ["linbow-word-rand-1-0", "conv1d-char-rand-2-0"];
        let m = matrix(&ids, &[Some(vec![1.0, 0.123456]), None]);
        let csv = m.to_csv();
        assert!(csv.contains("0.123456"));
        assert!(csv.contains("NA"));
        let parsed = TransferMatrix::from_csv(&csv).unwrap();
        assert_eq!(parsed.model_ids, m.model_ids);
        assert_eq!(parsed.rate(0, 1), Some(0.123456));
        assert_eq!(parsed.rate(1, 0), None);
    }

    #[test]
    fn budget_validation() {
        assert!(TransferBudget {
            attacked: 10,
            transferred: 20,
            seed: 0
        }
        .validate()
        .is_err());
        assert!(TransferBudget {
            attacked: 10,
            transferred: 5,
            seed: 0
        }
        .validate()
        .is_ok());
    }
}
