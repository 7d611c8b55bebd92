//! Overlap measures, robustness and abstention certificates, the safe-only
//! simulation, leakage audits and the Pareto audit.

mod leakage;
mod overlap;
mod pareto;
mod robustness;
mod simulation;
mod subsets;

pub use leakage::{
    certified_risk_level, leakage_audit, maximal_leakage, mutual_information,
    prompted_leakage_audit, prompted_steg_check, steg_certificate, steg_decode_probability,
    Decoder, LeakageReport, MessageFamily, PromptedFamily, PromptedLeakage, StegCertificate,
};
pub use overlap::{maximal_overlap, overlap, overlap_report, MaximalOverlap, OverlapReport};
pub use pareto::{
    is_jinx_proportional, pareto_audit, ParetoReport, ParetoRound, LAW_EQUALITY_TOLERANCE,
};
pub use robustness::{
    abstention_bound, average_distribution, best_abstention_bound, risk, risky_ratio,
    robustness_allowance, robustness_from_masses, verify_consensus_robustness,
    worst_case_robustness, Robustness, RobustnessCertificate, SubsetSums, UnsafeSet,
    BOUND_TOLERANCE, MAX_EXHAUSTIVE_SPACE,
};
pub use simulation::{simulate_safe_only, simulation_law};
pub use subsets::{subsets, Subsets, MAX_SUBSET_K};
