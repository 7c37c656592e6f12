//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. Variants are grouped by the
//! stage that produces them so callers (and the CLI's exit-code mapping) can
//! tell configuration mistakes, infeasible cluster setups, decode failures,
//! and numerical degeneracies apart without string matching.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix operation received operands of incompatible shape.
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    /// Matrix construction or an operation produced a non-finite entry.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A dimension is not divisible by the requested number of blocks.
    #[error("dimension {dim} is not divisible into {parts} equal blocks")]
    NotDivisible { dim: usize, parts: usize },

    /// Gaussian elimination hit a pivot below the singularity tolerance.
    #[error("matrix is singular (pivot {pivot} below tolerance at column {column})")]
    Singular { column: usize, pivot: f64 },

    /// An argument was outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix required to be symmetric deviates beyond the tolerance.
    #[error("matrix is not symmetric: max deviation {max_deviation:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { max_deviation: f64, tolerance: f64 },

    /// Two shards carry the same evaluation point; the linear system is rank
    /// deficient and no unique polynomial fits.
    #[error("duplicate evaluation point {point} among shards")]
    DuplicatePoint { point: f64 },

    /// Fewer responses arrived than the recovery threshold requires.
    #[error("insufficient responses: needed {needed}, got {got}")]
    InsufficientResponses { needed: usize, got: usize },

    /// Interpolation succeeded formally but surplus shards disagree with the
    /// fitted polynomial beyond the residual tolerance.
    #[error("decode residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NumericalDecode { residual: f64, tolerance: f64 },

    /// The iteration hit a singular inner system and cannot continue.
    #[error("degenerate iterate at iteration {iteration}: {context}")]
    Degeneracy { iteration: usize, context: String },

    /// The cluster cannot supply enough responsive workers for the code.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// Malformed configuration input (file contents or overrides).
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure while reading or writing external formats.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A matrix or shard file does not follow the documented layout.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Shorthand for [`Error::ShapeMismatch`].
    pub(crate) fn shape(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }
}
