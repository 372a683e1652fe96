//! Error type shared across the crate.
//!
//! Numerical routines fail loudly rather than papering over bad inputs:
//! a singular Gram matrix or an unsolvable system matrix is a property of
//! the problem instance and the caller decides whether to skip or abort.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CfError {
    /// A configuration value violates a documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The estimated channel does not have full column rank, so the
    /// zero-forcing Gram matrix cannot be factorized.
    #[error("rank-deficient channel: {rows}x{cols} estimate has a singular Gram matrix")]
    RankDeficientChannel { rows: usize, cols: usize },

    /// The robust-iteration system matrix stayed unsolvable even after
    /// diagonal loading.
    #[error("indefinite system matrix: solve failed at iteration {iteration} (jitter {jitter:.3e} applied)")]
    IndefiniteSystemMatrix { iteration: usize, jitter: f64 },

    /// Sum-rate evaluation produced a non-finite determinant.
    #[error("non-finite determinant in rate evaluation: {diagnostic}")]
    NonFiniteDeterminant { diagnostic: String },

    /// Catch-all for numeric breakdown (non-finite norms, empty traces, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File-system failure while reading configs or writing results.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CfError {
    /// Process exit code for the CLI: config errors 1, numerical errors 2,
    /// i/o errors 3 (0 is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            CfError::Config(_) => 1,
            CfError::Io { .. } => 3,
            _ => 2,
        }
    }

    /// Shorthand used by config parsing.
    pub fn config(msg: impl Into<String>) -> Self {
        CfError::Config(msg.into())
    }

    /// Attach a path to an [`std::io::Error`].
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CfError::Io {
            path: path.into(),
            source,
        }
    }
}
