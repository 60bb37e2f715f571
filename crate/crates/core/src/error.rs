use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {lhs:?} vs {rhs:?}")]
    Dimension { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown wavelet `{name}`; supported: {}", supported.join(", "))]
    UnknownWavelet { name: String, supported: Vec<&'static str> },

    #[error("filter bank `{wavelet}` failed self-check: {reason}")]
    FilterBank { wavelet: String, reason: String },

    #[error(
        "decomposition level {level} too deep for length {len} with {filter_len}-tap filters; \
         maximum feasible level is {max_level}"
    )]
    DecompositionDepth { level: usize, len: usize, filter_len: usize, max_level: usize },

    #[error("batch norm `{0}` evaluated before any training-mode statistics were recorded")]
    UninitializedStats(String),

    #[error("branch {branch}: {source}")]
    Branch {
        branch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse { path: PathBuf, row: usize, column: String, message: String },

    #[error("column `{0}` has zero variance on the training split")]
    ZeroVariance(String),

    #[error("split `{part}` too short: has {available} usable rows, needs at least {required}")]
    SplitTooShort { part: &'static str, available: usize, required: usize },

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint/config mismatch: {}", .0.join("; "))]
    ConfigMismatch(Vec<String>),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
    }

    pub(crate) fn in_branch(self, branch: usize) -> Self {
        Error::Branch { branch, source: Box::new(self) }
    }

    /// True for failures of the numerics rather than of inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFiniteGradient(_) | Error::Divergence { .. } | Error::FilterBank { .. } => true,
            Error::Branch { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
