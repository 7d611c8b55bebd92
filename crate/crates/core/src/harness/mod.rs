//! Scenario files, scripted adversaries, the external-oracle protocol,
//! seeded Monte Carlo and report emission.

mod adversary;
mod config;
mod demos;
mod external;
mod montecarlo;
mod report;
mod run;

pub use adversary::{adversary_distribution, build_adversary};
pub use config::{AdversaryParams, AttackKind, ModelSpec, ScenarioConfig, ScenarioFile, SCHEMA};
pub use demos::{abstention_curve, block_encoder_family, steg_demo, CurvePoint};
pub use external::{ExternalOracle, CONSISTENCY_TOLERANCE};
pub use montecarlo::{chunk_rng, monte_carlo, tv_tolerance, Tally, CHUNK_TRIALS};
pub use report::{emit_report, render_report, to_json, write_csv, write_table, Format};
pub use run::{
    build_ensemble, build_members, guaranteed_level, run_file, run_path, run_scenario,
    sampler_config, AbstentionBound, AbstentionSection, Certificate, ClaimStatus, EmpiricalSection,
    ExactSection, LeakageSection, OracleCalls, ParetoSection, Report, RunOptions, ScenarioReport,
    REPORT_SCHEMA,
};
