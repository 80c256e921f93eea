//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A case or matrix file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parsed input violated a structural constraint.
    #[error("invalid input: {0}")]
    Validation(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The measurement matrix has fewer independent columns than states.
    #[error("rank-deficient measurement matrix: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    /// The model is underdetermined (M <= K): residual-based detection needs
    /// more meters than states.
    #[error("underdetermined model: M = {m} meters must exceed K = {k} states")]
    Underdetermined { m: usize, k: usize },

    /// A normal-equation or autocovariance system could not be factorized.
    #[error("singular system in {0}")]
    Singular(&'static str),

    /// A scalar parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Component extraction failed (zero-variance input or all components
    /// pruned).
    #[error("degenerate observation block: {0}")]
    Degenerate(String),
}
