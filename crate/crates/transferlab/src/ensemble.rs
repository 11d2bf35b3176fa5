//! Logit-averaging ensembles and the search for high-transfer member sets:
//! a genetic algorithm over fixed-size subsets plus a deterministic greedy
//! baseline mimicking how an expert would pick complementary models.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::transfer::TransferMatrix;
use crate::zoo::{Classifier, ModelSpec, TextModel};

/// A fixed set of distinct member models predicting with the arithmetic
/// mean of their logits.
#[derive(Clone)]
pub struct EnsembleModel {
    members: Vec<Arc<Classifier>>,
}

impl EnsembleModel {
    pub fn new(members: Vec<Arc<Classifier>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        let label_count = members[0].label_count();
        if members.iter().any(|m| m.label_count() != label_count) {
            return Err(Error::Config("ensemble members disagree on label count".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.id()) {
                return Err(Error::Config(format!("duplicate ensemble member {}", m.id())));
            }
        }
        Ok(EnsembleModel { members })
    }

    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().map(|m| m.id()).collect()
    }

    pub fn members(&self) -> &[Arc<Classifier>] {
        &self.members
    }
}

impl TextModel for EnsembleModel {
    fn label_count(&self) -> usize {
        self.members[0].label_count()
    }

    fn logits(&self, tokens: &[Token]) -> Vec<f64> {
        let mut sum = vec![0.0; self.label_count()];
        for m in &self.members {
            for (acc, v) in sum.iter_mut().zip(m.logits(tokens)) {
                *acc += v;
            }
        }
        let n = self.members.len() as f64;
        sum.iter_mut().for_each(|v| *v /= n);
        sum
    }
}

/// A candidate member set with its fitness: the mean over the pool of the
/// best member-to-target transfer rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCandidate {
    /// Indices into the transfer matrix, sorted ascending.
    pub members: Vec<usize>,
    pub member_ids: Vec<String>,
    pub fitness: f64,
}

/// Genetic search configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub ensemble_size: usize,
    pub mutation_prob: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 20,
            generations: 50,
            ensemble_size: 3,
            mutation_prob: 0.3,
            elitism: 1,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("search population must be >= 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::Config("search generations must be >= 1".into()));
        }
        if self.ensemble_size < 1 || self.ensemble_size > pool_size {
            return Err(Error::Config(format!(
                "ensemble size {} out of range for pool of {pool_size}",
                self.ensemble_size
            )));
        }
        if self.elitism >= self.population {
            return Err(Error::Config("elitism must be < population".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Config("mutation_prob must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Candidate fitness per the pooled-max rule: for each target in the pool
/// take the best member rate, then average over the pool.
pub fn fitness(members: &[usize], matrix: &TransferMatrix, pool: &[usize]) -> Result<f64> {
    if members.is_empty() || pool.is_empty() {
        return Err(Error::Config("fitness needs members and a pool".into()));
    }
    let mut total = 0.0;
    for &t in pool {
        let mut best = f64::NEG_INFINITY;
        for &m in members {
            let rate = matrix.rate(m, t).ok_or_else(|| Error::MissingRate {
                source_id: matrix.model_ids[m].clone(),
                target_id: matrix.model_ids[t].clone(),
            })?;
            best = best.max(rate);
        }
        total += best;
    }
    Ok(total / pool.len() as f64)
}

/// Best/mean fitness of one generation, for the search log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

/// Result of a genetic search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: EnsembleCandidate,
    pub log: Vec<GenerationStat>,
}

impl SearchOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness\n");
        for row in &self.log {
            out.push_str(&format!(
                "{},{:.6},{:.6}\n",
                row.generation, row.best, row.mean
            ));
        }
        out
    }
}

fn candidate(members: Vec<usize>, matrix: &TransferMatrix, pool: &[usize]) -> Result<EnsembleCandidate> {
    let fit = fitness(&members, matrix, pool)?;
    let member_ids = members
        .iter()
        .map(|&m| matrix.model_ids[m].clone())
        .collect();
    Ok(EnsembleCandidate {
        members,
        member_ids,
        fitness: fit,
    })
}

fn random_subset(pool: &[usize], size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picks = pool.to_vec();
    picks.shuffle(rng);
    picks.truncate(size);
    picks.sort_unstable();
    picks
}

/// Genetic search for the best fixed-size member set. Deterministic given
/// the config seed; returns the best candidate ever evaluated.
pub fn genetic_search(
    matrix: &TransferMatrix,
    pool: &[usize],
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    config.validate(pool.len())?;
    let m = config.ensemble_size;
    if m == pool.len() {
        // Degenerate search space: the pool itself is the only candidate.
        let mut members = pool.to_vec();
        members.sort_unstable();
        let best = candidate(members, matrix, pool)?;
        let log = vec![GenerationStat {
            generation: 0,
            best: best.fitness,
            mean: best.fitness,
        }];
        return Ok(SearchOutcome { best, log });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut population: Vec<(Vec<usize>, f64)> = Vec::with_capacity(config.population);
    for _ in 0..config.population {
        let members = random_subset(pool, m, &mut rng);
        let fit = fitness(&members, matrix, pool)?;
        population.push((members, fit));
    }

    // Deterministic ranking: fitness desc, then member list asc.
    let rank = |pop: &mut Vec<(Vec<usize>, f64)>| {
        pop.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
    };
    rank(&mut population);
    let mut best_ever = population[0].clone();
    let mut log = Vec::with_capacity(config.generations + 1);
    let stat = |generation: usize, pop: &[(Vec<usize>, f64)]| GenerationStat {
        generation,
        best: pop[0].1,
        mean: pop.iter().map(|(_, f)| f).sum::<f64>() / pop.len() as f64,
    };
    log.push(stat(0, &population));

    for generation in 1..=config.generations {
        let mut next: Vec<(Vec<usize>, f64)> =
            population.iter().take(config.elitism).cloned().collect();

        let total: f64 = population.iter().map(|(_, f)| f).sum();
        let spin = |rng: &mut ChaCha8Rng| -> usize {
            if total <= 0.0 {
                return rng.gen_range(0..population.len());
            }
            let mut target = rng.gen_range(0.0..total);
            for (i, (_, f)) in population.iter().enumerate() {
                target -= f;
                if target <= 0.0 {
                    return i;
                }
            }
            population.len() - 1
        };

        while next.len() < config.population {
            let a = &population[spin(&mut rng)].0;
            let b = &population[spin(&mut rng)].0;
            let union: Vec<usize> = {
                let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
                u.sort_unstable();
                u.dedup();
                u
            };
            for _ in 0..2 {
                if next.len() >= config.population {
                    break;
                }
                let mut child = random_subset(&union, m, &mut rng);
                if rng.gen_bool(config.mutation_prob) {
                    let outside: Vec<usize> = pool
                        .iter()
                        .copied()
                        .filter(|p| !child.contains(p))
                        .collect();
                    if !outside.is_empty() {
                        let slot = rng.gen_range(0..child.len());
                        child[slot] = outside[rng.gen_range(0..outside.len())];
                        child.sort_unstable();
                    }
                }
                let fit = fitness(&child, matrix, pool)?;
                next.push((child, fit));
            }
        }
        rank(&mut next);
        if next[0].1 > best_ever.1 || (next[0].1 == best_ever.1 && next[0].0 < best_ever.0) {
            best_ever = next[0].clone();
        }
        log.push(stat(generation, &next));
        population = next;
    }

    let best = candidate(best_ever.0, matrix, pool)?;
    Ok(SearchOutcome { best, log })
}

/// Exhaustive enumeration of every size-m subset; the optimum the genetic
/// search is judged against.
pub fn exhaustive_search(
    matrix: &TransferMatrix,
    pool: &[usize],
    size: usize,
) -> Result<EnsembleCandidate> {
    if size < 1 || size > pool.len() {
        return Err(Error::Config(format!(
            "subset size {size} out of range for pool of {}",
            pool.len()
        )));
    }
    let n = pool.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut combo: Vec<usize> = (0..size).collect();
    loop {
        let members: Vec<usize> = combo.iter().map(|&i| pool[i]).collect();
        let fit = fitness(&members, matrix, pool)?;
        let better = match &best {
            None => true,
            Some((b_members, b_fit)) => fit > *b_fit || (fit == *b_fit && members < *b_members),
        };
        if better {
            best = Some((members, fit));
        }
        // Next lexicographic combination: bump the rightmost index that
        // still has room.
        let mut i = size as isize - 1;
        while i >= 0 && combo[i as usize] == n - size + i as usize {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        let i = i as usize;
        combo[i] += 1;
        for j in i + 1..size {
            combo[j] = combo[j - 1] + 1;
        }
    }
    let (members, _) = best.expect("at least one combination");
    candidate(members, matrix, pool)
}

/// Deterministic greedy baseline: start from the model with the highest
/// mean outgoing rate, then add the model with the best marginal fitness
/// gain, preferring (on ties) members that differ from everything already
/// chosen in input form, then architecture, then embedding init.
pub fn greedy_expert_baseline(
    matrix: &TransferMatrix,
    pool: &[usize],
    size: usize,
) -> Result<EnsembleCandidate> {
    if size < 1 || size > pool.len() {
        return Err(Error::Config(format!(
            "ensemble size {size} out of range for pool of {}",
            pool.len()
        )));
    }
    let specs: Result<Vec<ModelSpec>> = matrix
        .model_ids
        .iter()
        .map(|id| ModelSpec::parse_id(id))
        .collect();
    let specs = specs?;

    let row_mean = |s: usize| -> Result<f64> {
        let mut sum = 0.0;
        for &t in pool {
            sum += matrix.rate(s, t).ok_or_else(|| Error::MissingRate {
                source_id: matrix.model_ids[s].clone(),
                target_id: matrix.model_ids[t].clone(),
            })?;
        }
        Ok(sum / pool.len() as f64)
    };
    let mut seed_pick = pool[0];
    let mut seed_best = f64::NEG_INFINITY;
    for &s in pool {
        let mean = row_mean(s)?;
        if mean > seed_best {
            seed_best = mean;
            seed_pick = s;
        }
    }
    let mut members = vec![seed_pick];

    while members.len() < size {
        let current = fitness(&members, matrix, pool)?;
        // (gain, diversity preference, lowest index) ranking.
        let mut best: Option<(f64, (bool, bool, bool), usize)> = None;
        for &c in pool {
            if members.contains(&c) {
                continue;
            }
            let mut trial = members.clone();
            trial.push(c);
            trial.sort_unstable();
            let gain = fitness(&trial, matrix, pool)? - current;
            let spec = &specs[c];
            let diversity = (
                members.iter().all(|&m| specs[m].input_form != spec.input_form),
                members
                    .iter()
                    .all(|&m| specs[m].architecture != spec.architecture),
                members
                    .iter()
                    .all(|&m| specs[m].embedding_init != spec.embedding_init),
            );
            let replace = match &best {
                None => true,
                Some((g, d, idx)) => {
                    if gain > g + 1e-9 {
                        true
                    } else if gain >= g - 1e-9 {
                        // Tie on gain: prefer diversity, then lower index.
                        diversity > *d || (diversity == *d && c < *idx && gain >= *g)
                    } else {
                        false
                    }
                }
            };
            if replace {
                best = Some((gain, diversity, c));
            }
        }
        let (_, _, pick) = best.expect("pool larger than members");
        members.push(pick);
        members.sort_unstable();
    }
    candidate(members, matrix, pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::testutil::adj_tokens;
    use crate::transfer::TransferMatrix;
    use crate::zoo::Classifier;

    fn matrix_from(ids: &[&str], rates: &[Vec<f64>]) -> TransferMatrix {
        TransferMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            rates.iter().map(|r| Some((r.clone(), 10))).collect(),
        )
    }

    fn grid_ids(n: usize) -> Vec<String> {
        // Valid parseable ids for baseline diversity checks.
        let archs = ["linbow", "avgmlp", "conv1d", "recur"];
        let forms = ["word", "char"];
        (0..n)
            .map(|i| {
                format!(
                    "{}-{}-rand-{}-0",
                    archs[i % 4],
                    forms[(i / 4) % 2],
                    1 + (i / 8)
                )
            })
            .collect()
    }

    #[test]
    fn ensemble_logits_average_members() {
        let a = Classifier::linear_from_weights_seeded(&[("x", vec![1.0, 0.0])], 2, 1);
        let b = Classifier::linear_from_weights_seeded(&[("x", vec![0.0, 1.0])], 2, 2);
        let single = EnsembleModel::new(vec![Arc::new(a.clone())]).unwrap();
        let tokens = adj_tokens(&["x"]);
        assert_eq!(single.logits(&tokens), a.logits(&tokens));

        let pair = EnsembleModel::new(vec![Arc::new(a), Arc::new(b)]).unwrap();
        assert_eq!(pair.logits(&tokens), vec![0.5, 0.5]);
    }

    #[test]
    fn logit_mean_differs_from_probability_mean() {
        let a = Classifier::linear_from_weights_seeded(&[("x", vec![2.0, 0.0])], 2, 1);
        let b = Classifier::linear_from_weights_seeded(&[("x", vec![0.0, 4.0])], 2, 2);
        let pair = EnsembleModel::new(vec![Arc::new(a), Arc::new(b)]).unwrap();
        // Mean logits (1, 2): class 1 wins even though probability
        // averaging would be closer; documents the logit-mean choice.
        assert_eq!(pair.logits(&adj_tokens(&["x"])), vec![1.0, 2.0]);
        assert_eq!(pair.predict(&adj_tokens(&["x"])), 1);
    }

    #[test]
    fn duplicate_members_rejected() {
        let a = Arc::new(Classifier::linear_from_weights(&[("x", vec![1.0, 0.0])], 2));
        assert!(EnsembleModel::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn fitness_matches_hand_computation() {
        let ids = grid_ids(3);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        let m = matrix_from(
            &ids_ref,
            &[
                vec![1.0, 0.3, 0.1],
                vec![0.2, 1.0, 0.4],
                vec![0.1, 0.2, 1.0],
            ],
        );
        let pool = [0, 1, 2];
        let f = fitness(&[0], &m, &pool).unwrap();
        assert!((f - (1.0 + 0.3 + 0.1) / 3.0).abs() < 1e-12);
        // Per-target maxima for {0, 1}: (1.0, 1.0, 0.4).
        let f = fitness(&[0, 1], &m, &pool).unwrap();
        assert!((f - (1.0 + 1.0 + 0.4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fitness_monotone_in_members() {
        let ids = grid_ids(4);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        let m = matrix_from(
            &ids_ref,
            &[
                vec![1.0, 0.3, 0.1, 0.5],
                vec![0.2, 1.0, 0.4, 0.1],
                vec![0.1, 0.2, 1.0, 0.3],
                vec![0.4, 0.1, 0.2, 1.0],
            ],
        );
        let pool = [0, 1, 2, 3];
        let f1 = fitness(&[1], &m, &pool).unwrap();
        let f2 = fitness(&[1, 2], &m, &pool).unwrap();
        let f3 = fitness(&[1, 2, 3], &m, &pool).unwrap();
        assert!(f2 >= f1 && f3 >= f2);
    }

    #[test]
    fn genetic_search_degenerate_pool_returns_pool() {
        let ids = grid_ids(3);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        let m = matrix_from(
            &ids_ref,
            &[
                vec![1.0, 0.3, 0.1],
                vec![0.2, 1.0, 0.4],
                vec![0.1, 0.2, 1.0],
            ],
        );
        let pool = [0, 1, 2];
        let config = SearchConfig {
            ensemble_size: 3,
            ..Default::default()
        };
        let out = genetic_search(&m, &pool, &config).unwrap();
        assert_eq!(out.best.members, vec![0, 1, 2]);
        assert_eq!(out.best.fitness, fitness(&[0, 1, 2], &m, &pool).unwrap());
    }

    #[test]
    fn genetic_search_is_deterministic_and_matches_bruteforce_on_small_pool() {
        let ids = grid_ids(6);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        // Seeded pseudo-random rates.
        let mut rates = Vec::new();
        let mut x = 0.1f64;
        for s in 0..6 {
            let mut row = Vec::new();
            for t in 0..6 {
                if s == t {
                    row.push(1.0);
                } else {
                    x = (x * 7.13 + 0.37).fract();
                    row.push(x);
                }
            }
            rates.push(row);
        }
        let m = matrix_from(&ids_ref, &rates);
        let pool: Vec<usize> = (0..6).collect();
        let config = SearchConfig {
            population: 16,
            generations: 30,
            ensemble_size: 2,
            mutation_prob: 0.3,
            elitism: 1,
            seed: 4,
        };
        let a = genetic_search(&m, &pool, &config).unwrap();
        let b = genetic_search(&m, &pool, &config).unwrap();
        assert_eq!(a, b);
        let brute = exhaustive_search(&m, &pool, 2).unwrap();
        assert!(a.best.fitness >= brute.fitness - 1e-12);
        // Best-ever trace is non-decreasing.
        for w in a.log.windows(2) {
            assert!(w[1].best >= w[0].best - 1e-15);
        }
    }

    #[test]
    fn greedy_baseline_picks_dominant_first() {
        let ids = grid_ids(3);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        // Model 1 dominates every column.
        let m = matrix_from(
            &ids_ref,
            &[
                vec![0.5, 0.2, 0.1],
                vec![0.9, 1.0, 0.8],
                vec![0.1, 0.2, 0.6],
            ],
        );
        let pool = [0, 1, 2];
        let one = greedy_expert_baseline(&m, &pool, 1).unwrap();
        assert_eq!(one.members, vec![1]);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        let ids = grid_ids(8);
        let ids_ref: Vec<&str> = ids.iter().map(String::as_str).collect();
        let mut rates = Vec::new();
        let mut x = 0.35f64;
        for s in 0..8 {
            let mut row = Vec::new();
            for t in 0..8 {
                if s == t {
                    row.push(1.0);
                } else {
                    x = (x * 5.97 + 0.123).fract();
                    row.push(x);
                }
            }
            rates.push(row);
        }
        let m = matrix_from(&ids_ref, &rates);
        let pool: Vec<usize> = (0..8).collect();
        let greedy = greedy_expert_baseline(&m, &pool, 3).unwrap();
        let brute = exhaustive_search(&m, &pool, 3).unwrap();
        assert!(greedy.fitness <= brute.fitness + 1e-12);
    }

    #[test]
    fn missing_rate_is_an_error() {
        let ids = grid_ids(2);
        let m = TransferMatrix::from_rows(
            ids.clone(),
            vec![Some((vec![1.0, 0.5], 10)), None],
        );
        assert!(matches!(
            fitness(&[1], &m, &[0, 1]),
            Err(Error::MissingRate { .. })
        ));
    }
}
