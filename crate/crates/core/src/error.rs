//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Instance construction rejected the edge list or node count.
    #[error("invalid network instance: {0}")]
    InvalidInstance(String),

    /// Constraint index outside `0..=r`.
    #[error("constraint index {index} out of range (r = {r})")]
    ConstraintIndex { index: usize, r: usize },

    /// Configuration length does not match `d * n` of the instance.
    #[error("configuration has {got} coordinates, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    /// A NaN or infinity reached a numeric kernel.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A scalar parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Line search asked to move along a zero or ascent direction.
    #[error("line-search direction is not a descent direction")]
    NotDescentDirection,

    /// Density is undefined for fewer than two nodes.
    #[error("degenerate network: need at least 2 nodes, got {0}")]
    DegenerateNetwork(usize),

    /// Random instance generation could not satisfy its invariants.
    #[error("network generation failed: {0}")]
    Generation(String),

    /// Bracket expansion exhausted its budget without a sign change.
    #[error(
        "no sign change while bracketing (last c0 = {last_c0}, psi upper = {last_upper}); \
         the instance may be infeasible"
    )]
    NoBracket { last_c0: f64, last_upper: f64 },

    /// A minimax solve failed during a value-function evaluation.
    #[error("solver failed at c0 = {c0}: {source}")]
    Solver {
        c0: f64,
        #[source]
        source: Box<Error>,
    },

    /// A text input file did not match the expected format.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
