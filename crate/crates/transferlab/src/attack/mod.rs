//! Word-substitution adversarial attacks against logit-producing victims.

mod ga;
mod pwws;

pub use ga::{ga_attack, ga_attack_traced, GaConfig};
pub use pwws::{pwws_attack, single_substitution_flips};

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Pos, Token};
use crate::error::{Error, Result};
use crate::lexicon::SynonymLexicon;

/// One applied word replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub position: usize,
    pub original: String,
    pub replacement: String,
}

/// Outcome of attacking one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub example_id: u64,
    /// The perturbed token sequence (equal to the clean tokens when no
    /// substitution was applied).
    pub perturbed: Vec<Token>,
    pub substitutions: Vec<Substitution>,
    /// True iff the victim's argmax on `perturbed` differs from the gold
    /// label. A clean input the victim already misclassifies counts as a
    /// success with no substitutions.
    pub success: bool,
    /// Exact number of victim logit evaluations performed by the attack.
    pub queries: u64,
    /// Substitution count over the number of non-OTHER-POS tokens.
    pub word_modified_fraction: f64,
}

impl AdversarialResult {
    pub(crate) fn new(
        example: &Example,
        perturbed: Vec<Token>,
        substitutions: Vec<Substitution>,
        success: bool,
        queries: u64,
    ) -> AdversarialResult {
        let denom = example.substitutable_count();
        let word_modified_fraction = if denom == 0 {
            0.0
        } else {
            substitutions.len() as f64 / denom as f64
        };
        AdversarialResult {
            example_id: example.id,
            perturbed,
            substitutions,
            success,
            queries,
            word_modified_fraction,
        }
    }

    /// The flat record format used for JSONL attack logs: id,
    /// substitutions, success, queries, word_modified_fraction.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.example_id,
            "substitutions": self.substitutions,
            "success": self.success,
            "queries": self.queries,
            "word_modified_fraction": self.word_modified_fraction,
        })
    }
}

/// Apply substitutions to an example's tokens. Positions must be in range
/// and distinct, and each substitution's `original` must match the token
/// there; POS tags are retained from the originals.
pub fn apply_substitutions(example: &Example, subs: &[Substitution]) -> Result<Vec<Token>> {
    let mut tokens = example.tokens.clone();
    let mut seen = vec![false; tokens.len()];
    for sub in subs {
        let tok = tokens
            .get_mut(sub.position)
            .ok_or_else(|| Error::InvalidSubstitution(format!(
                "position {} out of range",
                sub.position
            )))?;
        if seen[sub.position] {
            return Err(Error::InvalidSubstitution(format!(
                "duplicate position {}",
                sub.position
            )));
        }
        seen[sub.position] = true;
        if tok.surface != sub.original {
            return Err(Error::InvalidSubstitution(format!(
                "token at {} is {:?}, not {:?}",
                sub.position, tok.surface, sub.original
            )));
        }
        tok.surface = sub.replacement.clone();
    }
    Ok(tokens)
}

/// Positions an attack may touch: content-word tokens with at least one
/// lexicon candidate.
pub(crate) fn substitutable_positions<'a>(
    example: &'a Example,
    lexicon: &'a SynonymLexicon,
) -> Vec<(usize, &'a [String])> {
    example
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.pos != Pos::Other)
        .filter_map(|(i, t)| {
            let cands = lexicon.candidates_for(t);
            (!cands.is_empty()).then_some((i, cands))
        })
        .collect()
}

/// Victim access with exact query accounting. Every call maps to one
/// victim logit evaluation.
pub(crate) struct Prober<'a> {
    victim: &'a dyn crate::zoo::TextModel,
    gold: usize,
    pub queries: u64,
}

impl<'a> Prober<'a> {
    pub fn new(victim: &'a dyn crate::zoo::TextModel, gold: usize) -> Self {
        Prober {
            victim,
            gold,
            queries: 0,
        }
    }

    /// (gold-class probability, predicted class).
    pub fn gold_prob(&mut self, tokens: &[Token]) -> (f64, usize) {
        self.queries += 1;
        let probs = self.victim.probabilities(tokens);
        (probs[self.gold], crate::math::argmax(&probs))
    }

    /// (max non-gold probability, predicted class).
    pub fn max_non_gold(&mut self, tokens: &[Token]) -> (f64, usize) {
        self.queries += 1;
        let probs = self.victim.probabilities(tokens);
        let best = probs
            .iter()
            .enumerate()
            .filter(|(z, _)| *z != self.gold)
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        (best, crate::math::argmax(&probs))
    }
}

/// Derive the substitution list by diffing perturbed tokens against the
/// original example, ordered by position.
pub(crate) fn diff_substitutions(example: &Example, perturbed: &[Token]) -> Vec<Substitution> {
    example
        .tokens
        .iter()
        .zip(perturbed)
        .filter(|(orig, new)| orig.surface != new.surface)
        .map(|(orig, new)| Substitution {
            position: orig.position,
            original: orig.surface.clone(),
            replacement: new.surface.clone(),
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::corpus::{Pos, Token};
    use crate::zoo::TextModel;
    use std::sync::atomic::{AtomicU64, Ordering};

    /// Wraps a victim and counts logit evaluations, for query-accounting
    /// checks.
    pub struct CountingModel<'a> {
        pub inner: &'a dyn TextModel,
        pub calls: AtomicU64,
    }

    impl<'a> CountingModel<'a> {
        pub fn new(inner: &'a dyn TextModel) -> Self {
            CountingModel {
                inner,
                calls: AtomicU64::new(0),
            }
        }

        pub fn count(&self) -> u64 {
            self.calls.load(Ordering::Relaxed)
        }
    }

    impl TextModel for CountingModel<'_> {
        fn label_count(&self) -> usize {
            self.inner.label_count()
        }

        fn logits(&self, tokens: &[Token]) -> Vec<f64> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.logits(tokens)
        }
    }

    /// A victim that ignores its input.
    pub struct ConstantModel(pub Vec<f64>);

    impl TextModel for ConstantModel {
        fn label_count(&self) -> usize {
            self.0.len()
        }

        fn logits(&self, _tokens: &[Token]) -> Vec<f64> {
            self.0.clone()
        }
    }

    pub fn adj_tokens(words: &[&str]) -> Vec<Token> {
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

    pub fn adj_example(id: u64, words: &[&str], label: usize) -> Example {
        Example {
            id,
            tokens: adj_tokens(words),
            label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn apply_empty_is_identity() {
        let ex = adj_example(0, &["keep", "it", "simple"], 0);
        assert_eq!(apply_substitutions(&ex, &[]).unwrap(), ex.tokens);
    }

    #[test]
    fn apply_changes_exactly_named_positions() {
        let ex = adj_example(0, &["a", "b", "c", "d"], 0);
        let subs = vec![
            Substitution {
                position: 1,
                original: "b".into(),
                replacement: "x".into(),
            },
            Substitution {
                position: 3,
                original: "d".into(),
                replacement: "y".into(),
            },
        ];
        let out = apply_substitutions(&ex, &subs).unwrap();
        let surfaces: Vec<_> = out.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["a", "x", "c", "y"]);
        assert_eq!(out[1].pos, ex.tokens[1].pos);
    }

    #[test]
    fn apply_rejects_duplicates_and_out_of_range() {
        let ex = adj_example(0, &["a"], 0);
        let dup = vec![
            Substitution {
                position: 0,
                original: "a".into(),
                replacement: "x".into(),
            },
            Substitution {
                position: 0,
                original: "x".into(),
                replacement: "y".into(),
            },
        ];
        assert!(apply_substitutions(&ex, &dup).is_err());
        let oob = vec![Substitution {
            position: 5,
            original: "a".into(),
            replacement: "x".into(),
        }];
        assert!(apply_substitutions(&ex, &oob).is_err());
    }

    #[test]
    fn table_style_sentence_substitution() {
        // "deal in congress to keep tax cuts" with keep -> preserve and
        // president -> chairman applied to the longer variant.
        let ex = adj_example(
            0,
            &["deal", "to", "keep", "tax", "cuts", "by", "president", "bush"],
            0,
        );
        let subs = vec![
            Substitution {
                position: 2,
                original: "keep".into(),
                replacement: "preserve".into(),
            },
            Substitution {
                position: 6,
                original: "president".into(),
                replacement: "chairman".into(),
            },
        ];
        let out = apply_substitutions(&ex, &subs).unwrap();
        let text = out
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(text, "deal to preserve tax cuts by chairman bush");
    }
}
