//! Greedy probability-weighted word-saliency attack.
//!
//! Replacement order combines two signals computed on the clean input:
//! the saliency of each position (gold-probability drop when the word is
//! masked with UNK) and the damage of its best substitute (gold-probability
//! drop when the substitute is applied). Substitutions are then applied
//! cumulatively in descending `softmax(saliency) * damage` order until the
//! victim flips.

use crate::corpus::Example;
use crate::error::Result;
use crate::lexicon::SynonymLexicon;
use crate::math::softmax;
use crate::zoo::{TextModel, UNK_SURFACE};

use super::{substitutable_positions, AdversarialResult, Substitution};

/// Attack one example with the greedy saliency-weighted strategy.
///
/// Candidates whose best substitute does not reduce the gold probability
/// are skipped during the greedy pass: applying them cannot help.
pub fn pwws_attack(
    victim: &dyn TextModel,
    example: &Example,
    lexicon: &SynonymLexicon,
) -> AdversarialResult {
    let gold = example.label;
    let mut prober = super::Prober::new(victim, gold);

    let (clean_gold, clean_pred) = prober.gold_prob(&example.tokens);
    if clean_pred != gold {
        // Vacuous attack: the clean input is already misclassified.
        return AdversarialResult::new(
            example,
            example.tokens.clone(),
            Vec::new(),
            true,
            prober.queries,
        );
    }

    let positions = substitutable_positions(example, lexicon);
    if positions.is_empty() {
        return AdversarialResult::new(
            example,
            example.tokens.clone(),
            Vec::new(),
            false,
            prober.queries,
        );
    }

    // Saliency of every position: probability drop under UNK masking.
    let n = example.tokens.len();
    let mut saliency = vec![0.0f64; n];
    let mut probe = example.tokens.clone();
    for i in 0..n {
        let original = std::mem::replace(&mut probe[i].surface, UNK_SURFACE.to_string());
        let (p, _) = prober.gold_prob(&probe);
        probe[i].surface = original;
        saliency[i] = clean_gold - p;
    }
    let weights = softmax(&saliency);

    // Best substitute per substitutable position, by single-substitution
    // damage on the clean input (ties to the lowest candidate index).
    struct Plan {
        position: usize,
        replacement: String,
        damage: f64,
        score: f64,
    }
    let mut plans: Vec<Plan> = Vec::with_capacity(positions.len());
    for (pos, candidates) in &positions {
        let mut best: Option<(f64, &str)> = None;
        for cand in candidates.iter() {
            let original = std::mem::replace(&mut probe[*pos].surface, cand.clone());
            let (p, _) = prober.gold_prob(&probe);
            probe[*pos].surface = original;
            let damage = clean_gold - p;
            if best.map_or(true, |(b, _)| damage > b) {
                best = Some((damage, cand));
            }
        }
        let (damage, replacement) = best.expect("non-empty candidate list");
        plans.push(Plan {
            position: *pos,
            replacement: replacement.to_string(),
            damage,
            score: weights[*pos] * damage,
        });
    }
    plans.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.position.cmp(&b.position))
    });

    // Greedy cumulative application.
    let mut perturbed = example.tokens.clone();
    let mut applied: Vec<Substitution> = Vec::new();
    for plan in &plans {
        if plan.damage <= 0.0 {
            continue; // cannot reduce the gold probability
        }
        let original = perturbed[plan.position].surface.clone();
        perturbed[plan.position].surface = plan.replacement.clone();
        applied.push(Substitution {
            position: plan.position,
            original,
            replacement: plan.replacement.clone(),
        });
        let (_, pred) = prober.gold_prob(&perturbed);
        if pred != gold {
            return AdversarialResult::new(example, perturbed, applied, true, prober.queries);
        }
    }
    AdversarialResult::new(example, perturbed, applied, false, prober.queries)
}

/// Brute-force check used by tests and oracles: does any single
/// substitution flip the victim? Returns the flipping substitutions.
pub fn single_substitution_flips(
    victim: &dyn TextModel,
    example: &Example,
    lexicon: &SynonymLexicon,
) -> Result<Vec<Substitution>> {
    let mut flips = Vec::new();
    let mut probe = example.tokens.clone();
    for (pos, candidates) in substitutable_positions(example, lexicon) {
        for cand in candidates {
            let original = std::mem::replace(&mut probe[pos].surface, cand.clone());
            if victim.predict(&probe) != example.label {
                flips.push(Substitution {
                    position: pos,
                    original: original.clone(),
                    replacement: cand.clone(),
                });
            }
            probe[pos].surface = original;
        }
    }
    Ok(flips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::testutil::*;
    use crate::corpus::Pos;
    use crate::zoo::Classifier;

    fn lexicon(entries: &[(&str, Pos, &[&str])]) -> SynonymLexicon {
        let mut lex = SynonymLexicon::new();
        for (word, pos, cands) in entries {
            lex.add_entry(word, *pos, cands.iter().copied());
        }
        lex
    }

    #[test]
    fn constant_victim_yields_no_effective_perturbation() {
        let lex = lexicon(&[("keep", Pos::Adj, &["preserve"])]);
        let ex = adj_example(0, &["keep", "it"], 0);
        // Constant argmax == gold: attack cannot succeed, zero damage.
        let victim = ConstantModel(vec![1.0, 0.0]);
        let res = pwws_attack(&victim, &ex, &lex);
        assert!(!res.success);
        assert!(res.substitutions.is_empty());

        // Constant argmax != gold: vacuous success.
        let victim = ConstantModel(vec![0.0, 1.0]);
        let res = pwws_attack(&victim, &ex, &lex);
        assert!(res.success);
        assert!(res.substitutions.is_empty());
        assert_eq!(res.queries, 1);
    }

    #[test]
    fn single_flip_victim_needs_exactly_one_substitution() {
        let victim = Classifier::linear_from_weights(
            &[
                ("keep", vec![2.0, 0.0]),
                ("it", vec![0.1, 0.0]),
                ("preserve", vec![0.0, 3.0]),
            ],
            2,
        );
        let lex = lexicon(&[("keep", Pos::Adj, &["preserve"])]);
        let ex = adj_example(7, &["keep", "it"], 0);

        let flips = single_substitution_flips(&victim, &ex, &lex).unwrap();
        assert_eq!(flips.len(), 1, "oracle: exactly one single-sub flip");

        let res = pwws_attack(&victim, &ex, &lex);
        assert!(res.success);
        assert_eq!(res.substitutions.len(), 1);
        assert_eq!(res.substitutions[0], flips[0]);
        assert_eq!(res.example_id, 7);
        assert!((res.word_modified_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn queries_are_counted_exactly() {
        let victim = Classifier::linear_from_weights(
            &[("keep", vec![1.0, 0.0]), ("preserve", vec![0.0, 2.0])],
            2,
        );
        let counting = CountingModel::new(&victim);
        let lex = lexicon(&[("keep", Pos::Adj, &["preserve"])]);
        let ex = adj_example(0, &["keep", "it"], 0);
        let res = pwws_attack(&counting, &ex, &lex);
        assert_eq!(res.queries, counting.count());
    }

    #[test]
    fn harmful_only_candidates_are_skipped() {
        // The only candidate increases the gold probability; the greedy
        // pass must skip it and fail honestly.
        let victim = Classifier::linear_from_weights(
            &[("fine", vec![1.0, 0.0]), ("superb", vec![5.0, 0.0])],
            2,
        );
        let lex = lexicon(&[("fine", Pos::Adj, &["superb"])]);
        let ex = adj_example(0, &["fine"], 0);
        let res = pwws_attack(&victim, &ex, &lex);
        assert!(!res.success);
        assert!(res.substitutions.is_empty());
        assert_eq!(res.perturbed, ex.tokens);
    }

    #[test]
    fn applies_multiple_substitutions_when_needed() {
        let victim = Classifier::linear_from_weights(
            &[
                ("fine", vec![1.0, 0.0]),
                ("good", vec![1.0, 0.0]),
                ("meh", vec![0.0, 0.9]),
                ("soso", vec![0.0, 0.9]),
            ],
            2,
        );
        let lex = lexicon(&[
            ("fine", Pos::Adj, &["meh"]),
            ("good", Pos::Adj, &["soso"]),
        ]);
        let ex = adj_example(0, &["fine", "good"], 0);
        assert!(single_substitution_flips(&victim, &ex, &lex)
            .unwrap()
            .is_empty());
        let res = pwws_attack(&victim, &ex, &lex);
        assert!(res.success);
        assert_eq!(res.substitutions.len(), 2);
        assert_eq!(res.word_modified_fraction, 1.0);
    }
}
