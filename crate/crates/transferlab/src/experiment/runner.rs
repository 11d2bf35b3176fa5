//! End-to-end experiment pipelines behind the CLI subcommands: zoo
//! training, single-victim attacks, transfer matrices, the factor study,
//! the ensemble sweep, and rule mining/evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, CorpusFormat, Dataset, Example, PosLexicon};
use crate::ensemble::{
    genetic_search, greedy_expert_baseline, EnsembleCandidate, EnsembleModel, SearchConfig,
};
use crate::error::{Error, Result};
use crate::experiment::cache::{load_matrix, matrix_key, store_matrix, ModelCache};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::plot::{render_bar_chart, render_line_plot, RefLine, Series};
use crate::experiment::report::Report;
use crate::lexicon::SynonymLexicon;
use crate::rules::{
    evaluate_rules, mine_uawr, pmi_rules, pmi_table, rule_attack, PmiTable, RuleEvalReport,
    RuleSet,
};
use crate::transfer::{
    build_transfer_matrix, class_level_matrix, factor_report, generate_adversarial_set,
    sample_attack_examples, transfer_rate, AttackEngine, FactorReport, TransferMatrix,
};
use crate::zoo::{
    build_zoo, Classifier, FactorAxis, ModelSpec, PretrainedEmbeddings,
};

/// Loaded inputs shared by every pipeline.
pub struct Lab {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub synonyms: SynonymLexicon,
    pub pos_lexicon: PosLexicon,
    pub pretrained: Option<PretrainedEmbeddings>,
    config_hash: String,
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedModel {
    pub id: String,
    pub test_accuracy: f64,
}

pub struct ZooOutcome {
    pub admitted: Vec<Arc<Classifier>>,
    pub excluded: Vec<ExcludedModel>,
    pub cache_hits: usize,
}

pub struct FactorStudyOutcome {
    /// (engine name, factor report), in run order.
    pub engines: Vec<(String, FactorReport)>,
    pub matrices: Vec<(String, TransferMatrix)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: usize,
    pub genetic: EnsembleCandidate,
    pub greedy: EnsembleCandidate,
    pub genetic_realized: f64,
    pub greedy_realized: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub best_single_id: String,
    pub best_single_realized: f64,
    pub mean_base_rate: f64,
    pub mean_pairwise_rate: f64,
}

pub struct RulesOutcome {
    pub members: Vec<String>,
    pub uawr: RuleSet,
    pub pmi: RuleSet,
    pub table: PmiTable,
}

pub struct EvalOutcome {
    /// One report per rho, per rule family.
    pub uawr: Vec<RuleEvalReport>,
    pub pmi: Vec<RuleEvalReport>,
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

impl Lab {
    pub fn load(config: ExperimentConfig) -> Result<Lab> {
        let pos_lexicon = PosLexicon::load(&config.lexicon.pos)?;
        let data = load_dataset(&config.dataset.path, CorpusFormat::Tsv, &pos_lexicon)?;
        let synonyms = SynonymLexicon::load(&config.lexicon.synonyms)?;
        let pretrained = match &config.embeddings {
            Some(path) => Some(PretrainedEmbeddings::load(path)?),
            None => None,
        };
        let config_hash = config.hash();
        let out_dir = config.out_dir();
        Ok(Lab {
            config,
            data,
            synonyms,
            pos_lexicon,
            pretrained,
            config_hash,
            out_dir,
        })
    }

    pub fn report(&self) -> Result<Report> {
        Report::new(&self.out_dir, self.config_hash.clone())
    }

    fn model_cache(&self) -> Result<ModelCache> {
        ModelCache::new(self.out_dir.join("models"))
    }

    /// Train (or load) every zoo spec, applying the admission floor.
    pub fn train_zoo(&self) -> Result<ZooOutcome> {
        let specs = build_zoo(&self.config.zoo.grid(), &self.config.zoo.seeds)?;
        let cache = self.model_cache()?;
        let results: Result<Vec<(Classifier, bool)>> = specs
            .par_iter()
            .map(|spec| cache.load_or_train(spec, &self.data, &self.config.train, self.pretrained.as_ref()))
            .collect();
        let mut admitted = Vec::new();
        let mut excluded = Vec::new();
        let mut cache_hits = 0;
        for (clf, hit) in results? {
            if hit {
                cache_hits += 1;
            }
            if clf.report().test_accuracy >= self.config.zoo.admission_floor {
                admitted.push(Arc::new(clf));
            } else {
                excluded.push(ExcludedModel {
                    id: clf.id(),
                    test_accuracy: clf.report().test_accuracy,
                });
            }
        }
        Ok(ZooOutcome {
            admitted,
            excluded,
            cache_hits,
        })
    }

    fn zoo_summary_csv(&self, zoo: &ZooOutcome) -> String {
        let mut csv = String::from("model,train_accuracy,test_accuracy,admitted\n");
        for m in &zoo.admitted {
            let _ = writeln!(
                csv,
                "{},{:.6},{:.6},yes",
                m.id(),
                m.report().train_accuracy,
                m.report().test_accuracy
            );
        }
        for e in &zoo.excluded {
            let _ = writeln!(csv, "{},,{:.6},no", e.id, e.test_accuracy);
        }
        csv
    }

    /// `train-zoo`: train everything, write the summary table.
    pub fn run_train_zoo(&self) -> Result<Report> {
        let zoo = self.train_zoo()?;
        let mut report = self.report()?;
        report.add("zoo summary", "tables/zoo-summary.csv", &self.zoo_summary_csv(&zoo))?;
        report.write_manifest()?;
        eprintln!(
            "trained {} models ({} cache hits, {} excluded)",
            zoo.admitted.len() + zoo.excluded.len(),
            zoo.cache_hits,
            zoo.excluded.len()
        );
        Ok(report)
    }

    fn find_victim<'a>(&self, zoo: &'a ZooOutcome) -> Result<&'a Arc<Classifier>> {
        match &self.config.attack.victim {
            Some(id) => zoo
                .admitted
                .iter()
                .find(|m| m.id() == *id)
                .ok_or_else(|| Error::Config(format!("victim {id} is not an admitted model"))),
            None => zoo
                .admitted
                .first()
                .ok_or_else(|| Error::Config("no admitted models".into())),
        }
    }

    /// `attack`: run the configured engine against one victim and log
    /// per-example results.
    pub fn run_attack(&self) -> Result<Report> {
        let zoo = self.train_zoo()?;
        let victim = self.find_victim(&zoo)?;
        let engine = self.config.attack.engine()?;
        let budget = self.config.budgets.transfer_budget();
        let examples = sample_attack_examples(&self.data, budget.attacked, budget.seed);
        let results: Result<Vec<crate::attack::AdversarialResult>> = examples
            .par_iter()
            .map(|ex| match &engine {
                AttackEngine::Pwws => Ok(crate::attack::pwws_attack(
                    victim.as_ref(),
                    ex,
                    &self.synonyms,
                )),
                AttackEngine::Ga(cfg) => {
                    let per_example = crate::attack::GaConfig {
                        seed: crate::math::mix_seed(
                            crate::math::mix_seed(budget.seed, cfg.seed),
                            ex.id,
                        ),
                        ..*cfg
                    };
                    crate::attack::ga_attack(victim.as_ref(), ex, &self.synonyms, &per_example)
                }
            })
            .collect();
        let results = results?;

        let mut jsonl = String::new();
        for r in &results {
            let _ = writeln!(jsonl, "{}", r.to_record());
        }
        let n = results.len().max(1);
        let successes = results.iter().filter(|r| r.success).count();
        let mean_queries =
            results.iter().map(|r| r.queries).sum::<u64>() as f64 / n as f64;
        let mean_fraction = results
            .iter()
            .map(|r| r.word_modified_fraction)
            .sum::<f64>()
            / n as f64;
        let summary = format!(
            "victim,engine,attacked,success_rate,mean_queries,mean_word_fraction\n{},{},{},{:.6},{:.2},{:.6}\n",
            victim.id(),
            engine.name(),
            results.len(),
            successes as f64 / n as f64,
            mean_queries,
            mean_fraction
        );
        let mut report = self.report()?;
        report.add("attack log", "attacks/attacks.jsonl", &jsonl)?;
        report.add("attack summary", "tables/attack-summary.csv", &summary)?;
        report.write_manifest()?;
        eprintln!(
            "attacked {} examples on {}: {} successes",
            results.len(),
            victim.id(),
            successes
        );
        Ok(report)
    }

    /// Build (or load from cache) the pairwise transfer matrix for the
    /// given engine over the admitted pool.
    pub fn transfer_matrix_for(
        &self,
        zoo: &ZooOutcome,
        engine: &AttackEngine,
    ) -> Result<TransferMatrix> {
        let ids: Vec<String> = zoo.admitted.iter().map(|m| m.id()).collect();
        let budget = self.config.budgets.transfer_budget();
        let cache_dir = self.out_dir.join("cache");
        let key = matrix_key(&self.data, &ids, engine, &budget);
        if let Some(matrix) = load_matrix(&cache_dir, &key) {
            if matrix.model_ids == ids {
                return Ok(matrix);
            }
        }
        let matrix =
            build_transfer_matrix(&zoo.admitted, &self.data, &self.synonyms, engine, &budget)?;
        store_matrix(&cache_dir, &key, &matrix)?;
        Ok(matrix)
    }

    /// Twin base rates for every admitted model under the given engine.
    pub fn base_rates_for(
        &self,
        zoo: &ZooOutcome,
        engine: &AttackEngine,
    ) -> Result<BTreeMap<String, f64>> {
        let cache = self.model_cache()?;
        let budget = self.config.budgets.transfer_budget();
        let rates: Result<Vec<(String, f64)>> = zoo
            .admitted
            .par_iter()
            .map(|target| {
                let (twin, _) = cache.load_or_train(
                    &target.spec().twin(),
                    &self.data,
                    &self.config.train,
                    self.pretrained.as_ref(),
                )?;
                let set = generate_adversarial_set(
                    &twin,
                    &self.data,
                    &self.synonyms,
                    engine,
                    &budget,
                )?;
                if set.is_empty() {
                    return Err(Error::EmptyAdversarialSet);
                }
                Ok((target.id(), transfer_rate(&set, target.as_ref())?))
            })
            .collect();
        Ok(rates?.into_iter().collect())
    }

    /// `transfer-matrix`: matrix CSV plus class-level aggregates per axis.
    pub fn run_transfer_matrix(&self) -> Result<Report> {
        let zoo = self.train_zoo()?;
        if zoo.admitted.is_empty() {
            return Err(Error::Config("no admitted models".into()));
        }
        let engine = self.config.attack.engine()?;
        let matrix = self.transfer_matrix_for(&zoo, &engine)?;
        let mut report = self.report()?;
        report.add(
            "transfer matrix",
            &format!("tables/transfer-matrix-{}.csv", engine.name()),
            &matrix.to_csv(),
        )?;
        for axis in FactorAxis::ALL {
            let grouping: BTreeMap<String, String> = matrix
                .model_ids
                .iter()
                .map(|id| {
                    let spec = ModelSpec::parse_id(id)?;
                    Ok((id.clone(), spec.axis_value(axis)))
                })
                .collect::<Result<_>>()?;
            let cm = class_level_matrix(&matrix, &grouping)?;
            report.add(
                &format!("class-level matrix by {axis}"),
                &format!("tables/class-matrix-{}-{axis}.csv", engine.name()),
                &cm.to_csv(),
            )?;
        }
        report.write_manifest()?;
        Ok(report)
    }

    /// Check that the admitted zoo still offers, for every axis, at least
    /// one same-seed pair differing in exactly that axis.
    fn check_axis_coverage(&self, zoo: &ZooOutcome) -> Result<()> {
        let grid = self.config.zoo.grid();
        let axes = [
            (FactorAxis::Architecture, grid.architectures.len()),
            (FactorAxis::InputForm, grid.input_forms.len()),
            (FactorAxis::Embedding, grid.embedding_inits.len()),
            (FactorAxis::Capacity, grid.depths.len()),
        ];
        for (axis, levels) in axes {
            if levels < 2 {
                return Err(Error::NoFactorPairs(format!(
                    "{axis} (grid has fewer than 2 levels)"
                )));
            }
        }
        let specs: Vec<ModelSpec> = zoo.admitted.iter().map(|m| *m.spec()).collect();
        for axis in FactorAxis::ALL {
            let covered = specs.iter().any(|s| {
                specs
                    .iter()
                    .any(|t| s != t && s.differs_only_in(t, axis))
            });
            if !covered {
                return Err(Error::NoFactorPairs(format!(
                    "{axis} (admission losses removed every contrast)"
                )));
            }
        }
        Ok(())
    }

    /// Factor study over both attack engines.
    pub fn factor_study(&self) -> Result<(ZooOutcome, FactorStudyOutcome)> {
        let zoo = self.train_zoo()?;
        self.check_axis_coverage(&zoo)?;
        let engines = [
            AttackEngine::Pwws,
            AttackEngine::Ga(self.config.attack.ga),
        ];
        let mut outcome = FactorStudyOutcome {
            engines: Vec::new(),
            matrices: Vec::new(),
        };
        for engine in engines {
            eprintln!("factor study: building {} matrix...", engine.name());
            let matrix = self.transfer_matrix_for(&zoo, &engine)?;
            eprintln!("factor study: computing {} base rates...", engine.name());
            let base = self.base_rates_for(&zoo, &engine)?;
            let fr = factor_report(&matrix, &base)?;
            outcome.engines.push((engine.name().to_string(), fr));
            outcome.matrices.push((engine.name().to_string(), matrix));
        }
        Ok((zoo, outcome))
    }

    /// `factor-study`: Table-1-shaped CSV plus bar chart and matrices.
    pub fn run_factor_study(&self) -> Result<Report> {
        let (_, outcome) = self.factor_study()?;
        let mut report = self.report()?;

        let mut csv = String::from("factor");
        for (name, _) in &outcome.engines {
            let _ = write!(csv, ",{name}");
        }
        csv.push('\n');
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for axis in FactorAxis::ALL {
            let _ = write!(csv, "{axis}");
            let mut row_vals = Vec::new();
            for (_, fr) in &outcome.engines {
                let v = fr.scores[axis.name()];
                let _ = write!(csv, ",{v:.6}");
                row_vals.push(v);
            }
            csv.push('\n');
            rows.push(axis.name().to_string());
            values.push(row_vals);
        }
        report.add("factor study", "tables/factor-study.csv", &csv)?;

        let columns: Vec<String> = outcome.engines.iter().map(|(n, _)| n.clone()).collect();
        let chart = render_bar_chart(
            "factor significance",
            "mean |rate - base|",
            &rows,
            &columns,
            &values,
        )?;
        report.add("factor chart", "figures/factor-study.svg", &chart)?;

        for (name, fr) in &outcome.engines {
            report.add(
                &format!("{name} factor report"),
                &format!("reports/factor-report-{name}.json"),
                &serde_json::to_string_pretty(fr).expect("report serializes"),
            )?;
            report.add(
                &format!("{name} base rates"),
                &format!("reports/base-rates-{name}.json"),
                &serde_json::to_string_pretty(&fr.base_rates).expect("rates serialize"),
            )?;
        }
        for (name, matrix) in &outcome.matrices {
            report.add(
                &format!("{name} transfer matrix"),
                &format!("tables/transfer-matrix-{name}.csv"),
                &matrix.to_csv(),
            )?;
        }
        report.write_manifest()?;
        Ok(report)
    }

    /// Realized transfer of an ensemble candidate: attack the
    /// logit-averaged victim and average transfer over non-member models.
    pub fn realized_transfer(
        &self,
        members: &[Arc<Classifier>],
        zoo: &ZooOutcome,
    ) -> Result<f64> {
        let ensemble = EnsembleModel::new(members.to_vec())?;
        let member_ids = ensemble.member_ids();
        let budget = self.config.budgets.transfer_budget();
        let set = generate_adversarial_set(
            &ensemble,
            &self.data,
            &self.synonyms,
            &self.config.attack.engine()?,
            &budget,
        )?;
        if set.is_empty() {
            return Err(Error::EmptyAdversarialSet);
        }
        let holdout: Vec<&Arc<Classifier>> = zoo
            .admitted
            .iter()
            .filter(|m| !member_ids.contains(&m.id()))
            .collect();
        if holdout.is_empty() {
            return Err(Error::Config("no held-out models to evaluate on".into()));
        }
        let rates: Result<Vec<f64>> = holdout
            .par_iter()
            .map(|m| transfer_rate(&set, m.as_ref()))
            .collect();
        let rates = rates?;
        Ok(rates.iter().sum::<f64>() / rates.len() as f64)
    }

    fn members_by_id(
        zoo: &ZooOutcome,
        ids: &[String],
    ) -> Result<Vec<Arc<Classifier>>> {
        ids.iter()
            .map(|id| {
                zoo.admitted
                    .iter()
                    .find(|m| m.id() == *id)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("{id} is not an admitted model")))
            })
            .collect()
    }

    /// Ensemble sweep across the configured sizes.
    pub fn ensemble_sweep(&self) -> Result<(ZooOutcome, SweepOutcome)> {
        let zoo = self.train_zoo()?;
        let engine = self.config.attack.engine()?;
        let matrix = self.transfer_matrix_for(&zoo, &engine)?;
        let base = self.base_rates_for(&zoo, &engine)?;
        let pool: Vec<usize> = (0..matrix.len()).collect();

        let mut points = Vec::new();
        for &size in &self.config.budgets.ensemble_sizes {
            if size > pool.len() {
                return Err(Error::Config(format!(
                    "ensemble size {size} exceeds pool of {}",
                    pool.len()
                )));
            }
            let search = SearchConfig {
                ensemble_size: size,
                ..self.config.search
            };
            let genetic = genetic_search(&matrix, &pool, &search)?;
            let greedy = greedy_expert_baseline(&matrix, &pool, size)?;
            let genetic_members = Self::members_by_id(&zoo, &genetic.best.member_ids)?;
            let greedy_members = Self::members_by_id(&zoo, &greedy.member_ids)?;
            let genetic_realized = self.realized_transfer(&genetic_members, &zoo)?;
            let greedy_realized = self.realized_transfer(&greedy_members, &zoo)?;
            eprintln!(
                "sweep m={size}: genetic fitness {:.3} realized {:.3} | greedy fitness {:.3} realized {:.3}",
                genetic.best.fitness, genetic_realized, greedy.fitness, greedy_realized
            );
            points.push(SweepPoint {
                size,
                genetic: genetic.best,
                greedy,
                genetic_realized,
                greedy_realized,
            });
        }

        // Best single local model: highest Eq.-1 fitness as a singleton.
        let mut best_single = 0usize;
        let mut best_fit = f64::NEG_INFINITY;
        for &s in &pool {
            let fit = crate::ensemble::fitness(&[s], &matrix, &pool)?;
            if fit > best_fit {
                best_fit = fit;
                best_single = s;
            }
        }
        let single_id = matrix.model_ids[best_single].clone();
        let single_member = Self::members_by_id(&zoo, std::slice::from_ref(&single_id))?;
        let best_single_realized = self.realized_transfer(&single_member, &zoo)?;

        let mean_base_rate = base.values().sum::<f64>() / base.len() as f64;
        let mean_pairwise_rate = matrix
            .mean_off_diagonal()
            .ok_or(Error::EmptyAdversarialSet)?;
        Ok((
            zoo,
            SweepOutcome {
                points,
                best_single_id: single_id,
                best_single_realized,
                mean_base_rate,
                mean_pairwise_rate,
            },
        ))
    }

    /// `ensemble-sweep`: sweep CSV plus the two-reference-line figure.
    pub fn run_ensemble_sweep(&self) -> Result<Report> {
        let (_, sweep) = self.ensemble_sweep()?;
        let mut report = self.report()?;
        let mut csv = String::from(
            "size,genetic_fitness,genetic_realized,greedy_fitness,greedy_realized,genetic_members,greedy_members\n",
        );
        for p in &sweep.points {
            let _ = writeln!(
                csv,
                "{},{:.6},{:.6},{:.6},{:.6},{},{}",
                p.size,
                p.genetic.fitness,
                p.genetic_realized,
                p.greedy.fitness,
                p.greedy_realized,
                p.genetic.member_ids.join("|"),
                p.greedy.member_ids.join("|")
            );
        }
        let _ = writeln!(
            csv,
            "best_single,{},{:.6},,,{},",
            "", sweep.best_single_realized, sweep.best_single_id
        );
        report.add("ensemble sweep", "tables/ensemble-sweep.csv", &csv)?;

        let series = vec![
            Series {
                name: "genetic".into(),
                points: sweep
                    .points
                    .iter()
                    .map(|p| (p.size as f64, p.genetic_realized))
                    .collect(),
            },
            Series {
                name: "greedy".into(),
                points: sweep
                    .points
                    .iter()
                    .map(|p| (p.size as f64, p.greedy_realized))
                    .collect(),
            },
        ];
        let refs = vec![
            RefLine {
                label: "mean base rate".into(),
                value: sweep.mean_base_rate,
            },
            RefLine {
                label: "mean pairwise rate".into(),
                value: sweep.mean_pairwise_rate,
            },
        ];
        let svg = render_line_plot(
            "realized transfer by ensemble size",
            "ensemble size",
            "mean transfer on held-out models",
            &series,
            &refs,
        )?;
        report.add("ensemble sweep figure", "figures/ensemble-sweep.svg", &svg)?;
        report.add(
            "ensemble sweep data",
            "reports/ensemble-sweep.json",
            &serde_json::to_string_pretty(&sweep).expect("sweep serializes"),
        )?;
        report.write_manifest()?;
        Ok(report)
    }

    /// Choose mining ensemble members: fixed list from the config, else
    /// genetic search at the configured size.
    fn mining_members(
        &self,
        zoo: &ZooOutcome,
    ) -> Result<Vec<String>> {
        if !self.config.rules.ensemble_members.is_empty() {
            return Ok(self.config.rules.ensemble_members.clone());
        }
        let engine = self.config.attack.engine()?;
        let matrix = self.transfer_matrix_for(zoo, &engine)?;
        let pool: Vec<usize> = (0..matrix.len()).collect();
        let outcome = genetic_search(&matrix, &pool, &self.config.search)?;
        Ok(outcome.best.member_ids)
    }

    /// Mine UAWR and PMI rule sets.
    pub fn mine_rules(&self) -> Result<(ZooOutcome, RulesOutcome)> {
        let zoo = self.train_zoo()?;
        let member_ids = self.mining_members(&zoo)?;
        let members = Self::members_by_id(&zoo, &member_ids)?;
        let ensemble = EnsembleModel::new(members)?;
        eprintln!("mining rules with ensemble {{{}}}", member_ids.join(", "));
        let uawr = mine_uawr(&ensemble, &self.data.train, &self.synonyms)
            .filter_min_support(self.config.rules.min_support);
        let table = pmi_table(&self.data.train, self.data.label_count())?;
        let pmi = pmi_rules(&self.data.train, &self.synonyms, &table)
            .filter_min_support(self.config.rules.min_support);
        if uawr.is_empty() || pmi.is_empty() {
            return Err(Error::Config(
                "rule mining produced an empty rule set after support filtering".into(),
            ));
        }
        Ok((
            zoo,
            RulesOutcome {
                members: member_ids,
                uawr,
                pmi,
                table,
            },
        ))
    }

    /// Top-rules listing: per label the strongest rules with PMI before
    /// and after replacement for every class.
    fn top_rules_csv(&self, rules: &RuleSet, table: &PmiTable, k: usize) -> String {
        let labels = &self.data.labels;
        let mut csv = String::from("label,original,replacement,salience,support");
        for l in labels {
            let _ = write!(csv, ",pmi_original_{l},pmi_replacement_{l}");
        }
        csv.push('\n');
        for rule in rules.top_per_label(k) {
            let _ = write!(
                csv,
                "{},{},{},{:.6},{}",
                labels[rule.label], rule.original, rule.replacement, rule.salience, rule.support
            );
            for z in 0..labels.len() {
                let _ = write!(
                    csv,
                    ",{:.3},{:.3}",
                    table.pmi(&rule.original, z),
                    table.pmi(&rule.replacement, z)
                );
            }
            csv.push('\n');
        }
        csv
    }

    /// `mine-rules`: rule TSVs, PMI table, top-rules listing.
    pub fn run_mine_rules(&self) -> Result<Report> {
        let (_, rules) = self.mine_rules()?;
        let labels = &self.data.labels;
        let mut report = self.report()?;
        report.add("uawr rules", "rules/rules-uawr.tsv", &rules.uawr.to_tsv(labels))?;
        report.add("pmi rules", "rules/rules-pmi.tsv", &rules.pmi.to_tsv(labels))?;
        report.add("pmi table", "rules/pmi-table.tsv", &rules.table.to_tsv(labels))?;
        report.add(
            "mining ensemble",
            "reports/mining-ensemble.json",
            &serde_json::to_string_pretty(&rules.members).expect("members serialize"),
        )?;
        report.add(
            "top rules",
            "tables/top-rules.csv",
            &self.top_rules_csv(&rules.uawr, &rules.table, 5),
        )?;
        report.write_manifest()?;
        Ok(report)
    }

    /// Deterministic capped evaluation slice of the test split.
    pub fn eval_examples(&self) -> Vec<&Example> {
        let cap = self.config.rules.eval_examples;
        if cap == 0 || cap >= self.data.test.len() {
            self.data.test.iter().collect()
        } else {
            sample_attack_examples(&self.data, cap, self.config.budgets.seed)
        }
    }

    /// Evaluate both rule families over the victim pool at every rho.
    pub fn eval_rules(
        &self,
        zoo: &ZooOutcome,
        rules: &RulesOutcome,
    ) -> Result<EvalOutcome> {
        let examples: Vec<Example> = self.eval_examples().into_iter().cloned().collect();
        let mut uawr = Vec::new();
        let mut pmi = Vec::new();
        for &rho in &self.config.budgets.rho_list {
            uawr.push(evaluate_rules(&rules.uawr, &zoo.admitted, &examples, rho)?);
            pmi.push(evaluate_rules(&rules.pmi, &zoo.admitted, &examples, rho)?);
        }
        Ok(EvalOutcome { uawr, pmi })
    }

    /// `eval-rules`: Table-4-shaped and Table-8-shaped CSVs.
    pub fn run_eval_rules(&self) -> Result<Report> {
        let (zoo, rules) = self.mine_rules()?;
        let eval = self.eval_rules(&zoo, &rules)?;
        let mut report = self.report()?;

        // Success/word table at the largest rho, PMI and UAWR side by side.
        let last = self.config.budgets.rho_list.len() - 1;
        let (u, p) = (&eval.uawr[last], &eval.pmi[last]);
        let mut csv = String::from("group,pmi_succ,pmi_word,uawr_succ,uawr_word\n");
        for group in ["all", "word", "char"] {
            let (Some(ug), Some(pg)) = (u.group(group), p.group(group)) else {
                continue;
            };
            let _ = writeln!(
                csv,
                "{group},{},{},{},{}",
                pct(pg.success_rate),
                pct(pg.mean_word_fraction),
                pct(ug.success_rate),
                pct(ug.mean_word_fraction)
            );
        }
        report.add("rule evaluation", "tables/rule-eval.csv", &csv)?;

        // Budget sweep: per rho, success per family and victim group.
        let mut csv = String::from(
            "rho,uawr_all,uawr_word,uawr_char,pmi_all,pmi_word,pmi_char\n",
        );
        for (i, &rho) in self.config.budgets.rho_list.iter().enumerate() {
            let u = &eval.uawr[i];
            let p = &eval.pmi[i];
            let g = |r: &RuleEvalReport, name: &str| {
                r.group(name).map(|g| pct(g.success_rate)).unwrap_or_default()
            };
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                pct(rho),
                g(u, "all"),
                g(u, "word"),
                g(u, "char"),
                g(p, "all"),
                g(p, "word"),
                g(p, "char")
            );
        }
        report.add("budget sweep", "tables/budget-sweep.csv", &csv)?;

        let per_victim = serde_json::to_string_pretty(&eval.uawr)
            .expect("eval serializes");
        report.add("uawr eval detail", "reports/rule-eval-uawr.json", &per_victim)?;
        let per_victim = serde_json::to_string_pretty(&eval.pmi).expect("eval serializes");
        report.add("pmi eval detail", "reports/rule-eval-pmi.json", &per_victim)?;
        report.write_manifest()?;
        Ok(report)
    }

    /// `report`: summarize the manifest into a human-readable index.
    pub fn run_report(&self) -> Result<Report> {
        let manifest = crate::experiment::report::read_manifest(&self.out_dir)?;
        let mut text = String::from("artifact\tsha256\tconfig\n");
        for a in &manifest.artifacts {
            let _ = writeln!(text, "{}\t{}\t{}", a.path, a.sha256, a.config_hash);
        }
        let mut report = self.report()?;
        report.add("summary", "summary.tsv", &text)?;
        report.write_manifest()?;
        Ok(report)
    }

    /// Demonstration helper: apply a rule set to one example.
    pub fn apply_rules_once(
        &self,
        rules: &RuleSet,
        example: &Example,
        rho: f64,
    ) -> crate::rules::RuleAttackResult {
        rule_attack(example, rules, rho)
    }
}
