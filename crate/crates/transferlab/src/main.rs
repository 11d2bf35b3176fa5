//! Config-driven command line for the transfer laboratory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use transferlab::experiment::{ExperimentConfig, Lab, Overrides};

#[derive(Parser)]
#[command(
    name = "transferlab",
    version,
    about = "Word-substitution attack transferability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides TRANSFERLAB_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    workers: Option<usize>,
    /// Override every experiment seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every model in the configured factor grid.
    TrainZoo(Common),
    /// Attack one victim model and log per-example results.
    Attack(Common),
    /// Build the pairwise transfer matrix and class-level aggregates.
    TransferMatrix(Common),
    /// Per-factor significance scores under both attack engines.
    FactorStudy(Common),
    /// Genetic vs greedy ensembles across sizes, with realized transfer.
    EnsembleSweep(Common),
    /// Mine ensemble-logit and PMI replacement rules.
    MineRules(Common),
    /// Evaluate mined rules over the victim pool at every word budget.
    EvalRules(Common),
    /// Summarize the output manifest.
    Report(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::TrainZoo(c)
            | Command::Attack(c)
            | Command::TransferMatrix(c)
            | Command::FactorStudy(c)
            | Command::EnsembleSweep(c)
            | Command::MineRules(c)
            | Command::EvalRules(c)
            | Command::Report(c) => c,
        }
    }
}

fn run(cli: Cli) -> transferlab::Result<()> {
    let common = cli.command.common();
    if let Some(workers) = common.workers {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let overrides = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        workers: common.workers,
    };
    let config = ExperimentConfig::load(&common.config, &overrides)?;
    let lab = Lab::load(config)?;
    let report = match &cli.command {
        Command::TrainZoo(_) => lab.run_train_zoo()?,
        Command::Attack(_) => lab.run_attack()?,
        Command::TransferMatrix(_) => lab.run_transfer_matrix()?,
        Command::FactorStudy(_) => lab.run_factor_study()?,
        Command::EnsembleSweep(_) => lab.run_ensemble_sweep()?,
        Command::MineRules(_) => lab.run_mine_rules()?,
        Command::EvalRules(_) => lab.run_eval_rules()?,
        Command::Report(_) => lab.run_report()?,
    };
    for artifact in report.artifacts() {
        println!("{}", report.out_dir().join(&artifact.path).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
