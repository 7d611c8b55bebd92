//! Finite output spaces, exact distributions, toy token models and the
//! oracle interface every other module consumes.

mod distribution;
mod oracle;
mod space;
mod token;

pub(crate) use distribution::sample_index;
pub use distribution::{
    mixture, validate_distribution, FiniteDistribution, DERIVED_TOLERANCE, INPUT_TOLERANCE,
};
pub use oracle::{
    oracle_from_exact, CountingOracle, Ensemble, ExactOracle, GenerativeOracle, PromptTable,
    PromptedOracle,
};
pub use space::{Outcome, OutcomeShape, OutputSpace, ENUMERATION_LIMIT};
pub use token::{token_model_prob, TokenModel, TokenModelSpec};
