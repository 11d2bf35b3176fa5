use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(PathBuf),

    #[error("dataset needs at least 2 labels, found {0}")]
    TooFewLabels(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged for {spec_id} at epoch {epoch}: loss = {loss}")]
    Diverged {
        spec_id: String,
        epoch: usize,
        loss: f64,
    },

    #[error("empty adversarial set")]
    EmptyAdversarialSet,

    #[error("no source/target pairs vary only in axis {0}")]
    NoFactorPairs(String),

    #[error("transfer rate missing for pair ({source_id}, {target_id})")]
    MissingRate {
        source_id: String,
        target_id: String,
    },

    #[error("model class {0} has no members")]
    EmptyClass(String),

    #[error("invalid substitution: {0}")]
    InvalidSubstitution(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code for the CLI: 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io { .. }
            | Error::MalformedLine { .. }
            | Error::UnknownLabel { .. }
            | Error::TooFewLabels(_)
            | Error::EmptyCorpus(_) => 1,
            _ => 2,
        }
    }
}
