//! Consensus sampling over `k` generative-model oracles.
//!
//! Given `k` models of which some unknown `s` are assumed safe, the sampler
//! repeatedly proposes an output from the uniform mixture of the models and
//! accepts it with probability equal to the mean of the `s` smallest model
//! probabilities divided by the mean of all of them. After `R` rejected
//! rounds it abstains. The resulting law is never riskier than `R` times the
//! average risk of the safest `s` models, for every unsafe set at once.
//!
//! Modules:
//!
//! * [`model`]: output spaces, exact distributions, token models, oracles.
//! * [`consensus`]: the sampler and the exact law it induces.
//! * [`analysis`]: overlap, robustness, abstention, leakage and optimality
//!   checks on finite instances.
//! * [`harness`]: scenario files, adversaries, external oracles, reports.

pub mod analysis;
pub mod consensus;
pub mod error;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
