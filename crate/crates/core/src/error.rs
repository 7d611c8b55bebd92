//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability vector is empty")]
    EmptyDistribution,

    #[error("negative mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("non-finite mass {value} at index {index}")]
    NonFiniteMass { index: usize, value: f64 },

    #[error("mass sums to {sum}, expected 1 (tolerance {tolerance:e})")]
    NotNormalized { sum: f64, tolerance: f64 },

    #[error("output spaces differ: {expected} vs {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("invalid output space: {0}")]
    InvalidSpace(String),

    #[error("outcome {0} does not belong to this output space")]
    OutcomeOutOfRange(String),

    #[error("sequence has length {found}, model horizon is {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid token model: {0}")]
    InvalidTokenModel(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("every member assigns zero probability to the candidate outcome")]
    ZeroDenominator,

    #[error("acceptance ratio {0} exceeds 1 beyond tolerance")]
    AcceptanceOverflow(f64),

    #[error("unbounded rounds require every member to expose an exact distribution")]
    UnboundedWithoutExactView,

    #[error("per-round acceptance mass is zero, the sampler always abstains")]
    AlwaysAbstains,

    #[error("pointwise median has zero total mass")]
    DegenerateMedian,

    #[error("subset is empty")]
    EmptySubset,

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("c = {c} is outside 0..={max}")]
    BadC { c: usize, max: usize },

    #[error("safe-majority condition fails: s = {s}, k = {k}")]
    NoSafeMajority { s: usize, k: usize },

    #[error("exhaustive enumeration too large: {0}")]
    TooLarge(String),

    #[error("invalid message family: {0}")]
    InvalidFamily(String),

    #[error("invalid adversary parameters: {0}")]
    BadParams(String),

    #[error("oracle protocol error: {0}")]
    OracleProtocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
