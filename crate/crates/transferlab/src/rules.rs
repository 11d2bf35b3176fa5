//! Universal adversarial word replacement rules.
//!
//! Mining walks every (instance, position, candidate) event, scores each
//! replacement by the ensemble logit movement it causes (toward the gold
//! class on the gold logit, away from it on the others), and averages per
//! rule. The PMI variant scores the same rule universe from corpus
//! word-label association alone, with no model access. Rules are applied
//! greedily by salience under a modified-word budget.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::Substitution;
use crate::corpus::{Example, Pos, Token};
use crate::error::{Error, Result};
use crate::lexicon::SynonymLexicon;
use crate::zoo::{Classifier, InputForm, TextModel};

/// One (label, original -> replacement) rule with its mined salience and
/// the number of contributing (instance, position) events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementRule {
    pub label: usize,
    pub original: String,
    pub replacement: String,
    pub salience: f64,
    pub support: u64,
}

/// A set of rules indexed by (label, original word), sorted inside each
/// slot by descending salience with lexicographic replacement tie-break.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<ReplacementRule>,
    index: HashMap<(usize, String), Vec<usize>>,
}

impl RuleSet {
    pub fn new(mut rules: Vec<ReplacementRule>) -> RuleSet {
        rules.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then_with(|| b.salience.partial_cmp(&a.salience).unwrap())
                .then_with(|| a.original.cmp(&b.original))
                .then_with(|| a.replacement.cmp(&b.replacement))
        });
        let mut index: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        for (i, rule) in rules.iter().enumerate() {
            index
                .entry((rule.label, rule.original.clone()))
                .or_default()
                .push(i);
        }
        // Within a slot: descending salience, ties by replacement; the
        // global sort above already yields this order, but make it explicit
        // against future re-sorts.
        for slot in index.values_mut() {
            slot.sort_by(|&a, &b| {
                rules[b]
                    .salience
                    .partial_cmp(&rules[a].salience)
                    .unwrap()
                    .then_with(|| rules[a].replacement.cmp(&rules[b].replacement))
            });
        }
        RuleSet { rules, index }
    }

    pub fn rules(&self) -> &[ReplacementRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Highest-salience rule for (label, surface), if any.
    pub fn best_for(&self, label: usize, surface: &str) -> Option<&ReplacementRule> {
        self.index
            .get(&(label, surface.to_string()))
            .map(|slot| &self.rules[slot[0]])
    }

    /// Drop rules below a support threshold.
    pub fn filter_min_support(&self, min_support: u64) -> RuleSet {
        RuleSet::new(
            self.rules
                .iter()
                .filter(|r| r.support >= min_support)
                .cloned()
                .collect(),
        )
    }

    /// Keep the top `k` rules per label by salience.
    pub fn top_per_label(&self, k: usize) -> Vec<&ReplacementRule> {
        let mut out = Vec::new();
        let mut label = None;
        let mut taken = 0usize;
        for rule in &self.rules {
            if label != Some(rule.label) {
                label = Some(rule.label);
                taken = 0;
            }
            if taken < k {
                out.push(rule);
                taken += 1;
            }
        }
        out
    }

    /// TSV: `label<TAB>original<TAB>replacement<TAB>salience<TAB>support`,
    /// sorted by (label, descending salience); 9-decimal salience.
    pub fn to_tsv(&self, labels: &[String]) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.9}\t{}\n",
                labels[rule.label], rule.original, rule.replacement, rule.salience, rule.support
            ));
        }
        out
    }

    pub fn from_tsv(text: &str, labels: &[String]) -> Result<RuleSet> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::Other(format!(
                    "rules tsv line {}: expected 5 fields",
                    idx + 1
                )));
            }
            let label = labels
                .iter()
                .position(|l| l == fields[0])
                .ok_or_else(|| Error::Other(format!("rules tsv line {}: unknown label", idx + 1)))?;
            rules.push(ReplacementRule {
                label,
                original: fields[1].to_string(),
                replacement: fields[2].to_string(),
                salience: fields[3]
                    .parse()
                    .map_err(|_| Error::Other(format!("rules tsv line {}: bad salience", idx + 1)))?,
                support: fields[4]
                    .parse()
                    .map_err(|_| Error::Other(format!("rules tsv line {}: bad support", idx + 1)))?,
            });
        }
        Ok(RuleSet::new(rules))
    }
}

type RuleKey = (usize, String, String);

/// Per-instance traversal of every candidate replacement event. Calls the
/// visitor with (key, gold logits, perturbed logits) for mining, or just
/// counts events when `logits` is None.
fn instance_events(
    example: &Example,
    lexicon: &SynonymLexicon,
    mut visit: impl FnMut(RuleKey, usize),
) {
    for (i, tok) in example.tokens.iter().enumerate() {
        if tok.pos == Pos::Other {
            continue;
        }
        for cand in lexicon.candidates_for(tok) {
            visit((example.label, tok.surface.clone(), cand.clone()), i);
        }
    }
}

/// Mine replacement rules from an ensemble's logits over the training set.
///
/// Work parallelizes over instances; per-instance contributions are merged
/// in instance order so the result is independent of the worker count.
pub fn mine_uawr(
    ensemble: &dyn TextModel,
    train: &[Example],
    lexicon: &SynonymLexicon,
) -> RuleSet {
    let per_instance: Vec<Vec<(RuleKey, f64)>> = train
        .par_iter()
        .map(|ex| {
            let mut events: Vec<(RuleKey, f64)> = Vec::new();
            let clean = ensemble.logits(&ex.tokens);
            let mut probe = ex.tokens.clone();
            instance_events(ex, lexicon, |key, position| {
                let original =
                    std::mem::replace(&mut probe[position].surface, key.2.clone());
                let perturbed = ensemble.logits(&probe);
                probe[position].surface = original;
                let mut h = 0.0;
                for z in 0..clean.len() {
                    if z == ex.label {
                        h += clean[z] - perturbed[z];
                    } else {
                        h += perturbed[z] - clean[z];
                    }
                }
                events.push((key, h));
            });
            events
        })
        .collect();

    let mut acc: HashMap<RuleKey, (f64, u64)> = HashMap::new();
    for events in per_instance {
        for (key, h) in events {
            let slot = acc.entry(key).or_insert((0.0, 0));
            slot.0 += h;
            slot.1 += 1;
        }
    }
    let rules = acc
        .into_iter()
        .map(|((label, original, replacement), (h_sum, count))| ReplacementRule {
            label,
            original,
            replacement,
            salience: h_sum / count as f64,
            support: count,
        })
        .collect();
    RuleSet::new(rules)
}

/// Corpus word-label association table using the ratio form
/// p(w, z) / (p(w) p(z)) over instance-level occurrence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmiTable {
    n_instances: usize,
    label_counts: Vec<usize>,
    word_counts: HashMap<String, usize>,
    joint_counts: HashMap<(String, usize), usize>,
}

impl PmiTable {
    pub fn label_count(&self) -> usize {
        self.label_counts.len()
    }

    pub fn p_label(&self, z: usize) -> f64 {
        self.label_counts[z] as f64 / self.n_instances as f64
    }

    pub fn p_word(&self, w: &str) -> f64 {
        self.word_counts.get(w).copied().unwrap_or(0) as f64 / self.n_instances as f64
    }

    pub fn p_joint(&self, w: &str, z: usize) -> f64 {
        self.joint_counts
            .get(&(w.to_string(), z))
            .copied()
            .unwrap_or(0) as f64
            / self.n_instances as f64
    }

    /// Ratio-form PMI; absent words and labels that never co-occur give 0.
    pub fn pmi(&self, w: &str, z: usize) -> f64 {
        let joint = self.p_joint(w, z);
        if joint == 0.0 {
            return 0.0;
        }
        joint / (self.p_word(w) * self.p_label(z))
    }

    pub fn words(&self) -> impl Iterator<Item = &String> {
        self.word_counts.keys()
    }

    /// TSV: `word<TAB>label<TAB>pmi`, sorted by (word, label index).
    pub fn to_tsv(&self, labels: &[String]) -> String {
        let mut words: Vec<&String> = self.word_counts.keys().collect();
        words.sort();
        let mut out = String::new();
        for w in words {
            for (z, name) in labels.iter().enumerate() {
                out.push_str(&format!("{w}\t{name}\t{:.9}\n", self.pmi(w, z)));
            }
        }
        out
    }
}

/// Build the PMI table from a training split.
pub fn pmi_table(train: &[Example], label_count: usize) -> Result<PmiTable> {
    if train.is_empty() {
        return Err(Error::Config("PMI table needs a non-empty training set".into()));
    }
    let mut label_counts = vec![0usize; label_count];
    let mut word_counts: HashMap<String, usize> = HashMap::new();
    let mut joint_counts: HashMap<(String, usize), usize> = HashMap::new();
    for ex in train {
        label_counts[ex.label] += 1;
        let mut seen: Vec<&str> = ex.tokens.iter().map(|t| t.surface.as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        for w in seen {
            *word_counts.entry(w.to_string()).or_insert(0) += 1;
            *joint_counts.entry((w.to_string(), ex.label)).or_insert(0) += 1;
        }
    }
    Ok(PmiTable {
        n_instances: train.len(),
        label_counts,
        word_counts,
        joint_counts,
    })
}

/// Association-shift salience of replacing `w` with `replacement` under
/// label `z`: how much association with `z` is lost plus how much
/// association with the other labels is gained.
pub fn pmi_salience(table: &PmiTable, z: usize, w: &str, replacement: &str) -> f64 {
    let mut h = table.pmi(w, z) - table.pmi(replacement, z);
    for other in 0..table.label_count() {
        if other != z {
            h += table.pmi(replacement, other) - table.pmi(w, other);
        }
    }
    h
}

/// Build the PMI-scored rule set over the same (instance, position,
/// candidate) universe as mining, with no model access.
pub fn pmi_rules(
    train: &[Example],
    lexicon: &SynonymLexicon,
    table: &PmiTable,
) -> RuleSet {
    let mut counts: HashMap<RuleKey, u64> = HashMap::new();
    for ex in train {
        instance_events(ex, lexicon, |key, _| {
            *counts.entry(key).or_insert(0) += 1;
        });
    }
    let rules = counts
        .into_iter()
        .map(|((label, original, replacement), support)| {
            let salience = pmi_salience(table, label, &original, &replacement);
            ReplacementRule {
                label,
                original,
                replacement,
                salience,
                support,
            }
        })
        .collect();
    RuleSet::new(rules)
}

/// Outcome of a rule-based attack: perturbed tokens and the applied
/// substitutions, with no victim queries and success left to the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleAttackResult {
    pub example_id: u64,
    pub perturbed: Vec<Token>,
    pub substitutions: Vec<Substitution>,
    pub word_modified_fraction: f64,
}

/// Greedily apply the highest-salience matching rules until the budget
/// floor(rho * substitutable tokens) is reached or no rule matches. Ties
/// break toward the lower position, then the lexicographically smaller
/// replacement; a position is modified at most once.
pub fn rule_attack(example: &Example, rules: &RuleSet, rho: f64) -> RuleAttackResult {
    let substitutable = example.substitutable_count();
    let budget = (rho * substitutable as f64).floor() as usize;
    let mut perturbed = example.tokens.clone();
    let mut modified = vec![false; perturbed.len()];
    let mut substitutions = Vec::new();

    while substitutions.len() < budget {
        let mut best: Option<(usize, &ReplacementRule)> = None;
        for (i, tok) in perturbed.iter().enumerate() {
            if modified[i] {
                continue;
            }
            let Some(rule) = rules.best_for(example.label, &tok.surface) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((_, b)) => rule.salience > b.salience,
            };
            if better {
                best = Some((i, rule));
            }
        }
        let Some((position, rule)) = best else { break };
        substitutions.push(Substitution {
            position,
            original: perturbed[position].surface.clone(),
            replacement: rule.replacement.clone(),
        });
        perturbed[position].surface = rule.replacement.clone();
        modified[position] = true;
    }

    let word_modified_fraction = if substitutable == 0 {
        0.0
    } else {
        substitutions.len() as f64 / substitutable as f64
    };
    RuleAttackResult {
        example_id: example.id,
        perturbed,
        substitutions,
        word_modified_fraction,
    }
}

/// Per-victim rule evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VictimEval {
    pub model_id: String,
    pub input_form: InputForm,
    /// Clean-correct examples the rules were applied to.
    pub evaluated: usize,
    /// Fraction of evaluated examples flipped.
    pub success_rate: f64,
    /// Mean modified-word fraction over all evaluated examples.
    pub mean_word_fraction: f64,
}

/// Victim-group aggregate (mean of member victims' rates).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupEval {
    pub name: String,
    pub success_rate: f64,
    pub mean_word_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleEvalReport {
    pub rho: f64,
    pub per_victim: Vec<VictimEval>,
    pub groups: Vec<GroupEval>,
}

impl RuleEvalReport {
    pub fn group(&self, name: &str) -> Option<&GroupEval> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn mean_success(&self) -> f64 {
        if self.per_victim.is_empty() {
            return 0.0;
        }
        self.per_victim.iter().map(|v| v.success_rate).sum::<f64>()
            / self.per_victim.len() as f64
    }
}

/// Evaluate a rule set over a victim pool: per victim, Succ% over its
/// clean-correct test examples and mean Word% over all attacked ones, plus
/// input-form group aggregates.
pub fn evaluate_rules(
    rules: &RuleSet,
    victims: &[Arc<Classifier>],
    test: &[Example],
    rho: f64,
) -> Result<RuleEvalReport> {
    // Rule application does not depend on the victim, so attack once.
    let attacked: Vec<RuleAttackResult> = test
        .par_iter()
        .map(|ex| rule_attack(ex, rules, rho))
        .collect();

    let per_victim: Vec<VictimEval> = victims
        .par_iter()
        .map(|victim| {
            let mut evaluated = 0usize;
            let mut flipped = 0usize;
            let mut word_sum = 0.0;
            for (ex, attack) in test.iter().zip(&attacked) {
                if victim.predict(&ex.tokens) != ex.label {
                    continue; // only clean-correct examples count
                }
                evaluated += 1;
                word_sum += attack.word_modified_fraction;
                if victim.predict(&attack.perturbed) != ex.label {
                    flipped += 1;
                }
            }
            VictimEval {
                model_id: victim.id(),
                input_form: victim.spec().input_form,
                evaluated,
                success_rate: if evaluated == 0 {
                    0.0
                } else {
                    flipped as f64 / evaluated as f64
                },
                mean_word_fraction: if evaluated == 0 {
                    0.0
                } else {
                    word_sum / evaluated as f64
                },
            }
        })
        .collect();

    let mut groups = Vec::new();
    let mut push_group = |name: &str, members: Vec<&VictimEval>| {
        if members.is_empty() {
            return;
        }
        groups.push(GroupEval {
            name: name.to_string(),
            success_rate: members.iter().map(|v| v.success_rate).sum::<f64>()
                / members.len() as f64,
            mean_word_fraction: members.iter().map(|v| v.mean_word_fraction).sum::<f64>()
                / members.len() as f64,
        });
    };
    push_group("all", per_victim.iter().collect());
    push_group(
        "word",
        per_victim
            .iter()
            .filter(|v| v.input_form == InputForm::Word)
            .collect(),
    );
    push_group(
        "char",
        per_victim
            .iter()
            .filter(|v| v.input_form == InputForm::CharNgram)
            .collect(),
    );

    Ok(RuleEvalReport {
        rho,
        per_victim,
        groups,
    })
}
