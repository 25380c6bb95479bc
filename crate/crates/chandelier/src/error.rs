//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter violated a documented bound. The message names
    /// the parameter and the bound.
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    /// A hard size cap was exceeded (enumeration size, oracle scale,
    /// bitmask width, ...).
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    /// A catalog does not contain enough bulbs to build the requested family.
    #[error("insufficient bulbs: need {need}, catalog J(K={k}, R={r}) has {have}")]
    InsufficientBulbs {
        need: usize,
        have: usize,
        k: usize,
        r: String,
    },

    /// Estimated cost (flops or bytes) exceeds the configured ceiling.
    /// Reported before any work starts.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// An automorphism count overflowed 128 bits.
    #[error("automorphism count overflow (exceeds u128) for tree with {edges} edges")]
    AutOverflow { edges: usize },

    /// A result violated an internal contract (e.g. non-finite scores).
    #[error("internal invariant violation: {0}")]
    InvariantViolation(String),

    /// Malformed input file or config.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
