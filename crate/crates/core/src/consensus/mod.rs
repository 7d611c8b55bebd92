//! The consensus sampler (plain, prompted and with slack) together with the
//! exact output law, jinx distribution and median distribution it induces.

mod law;
mod sampler;

pub(crate) use law::{abstain_after, check_s};
pub use law::{
    acceptance_weights, exact_output_law, jinx_distribution, lower_mean, median_distribution,
    order_statistics, probability_columns, JinxResult, OutputLaw,
};
pub use sampler::{
    acceptance_from_log_probs, acceptance_probability, acceptance_ratio, consensus_sample,
    consensus_sample_prompted, RoundBudget, SampleResult, SamplerConfig,
};
