//! Config-driven experiment orchestration: reproducible pipelines that
//! emit CSV tables, SVG figures, and a content-hash manifest.

pub mod cache;
pub mod config;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Overrides};
pub use plot::{render_bar_chart, render_line_plot, RefLine, Series};
pub use report::{read_manifest, Artifact, Manifest, Report};
pub use runner::{EvalOutcome, FactorStudyOutcome, Lab, RulesOutcome, SweepOutcome, ZooOutcome};
