use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adversary::build_adversary;
use super::config::{ModelSpec, ScenarioConfig, ScenarioFile};
use super::external::ExternalOracle;
use super::montecarlo::{chunk_rng, monte_carlo, tv_tolerance, Tally};
use crate::analysis::{
    abstention_bound, average_distribution, best_abstention_bound, leakage_audit, maximal_overlap,
    overlap_report, pareto_audit, risk, steg_certificate, verify_consensus_robustness, Decoder,
    LeakageReport, MessageFamily, OverlapReport, ParetoReport, RobustnessCertificate,
    StegCertificate, UnsafeSet, BOUND_TOLERANCE, MAX_EXHAUSTIVE_SPACE, MAX_SUBSET_K,
};
use crate::consensus::{
    acceptance_weights, exact_output_law, OutputLaw, RoundBudget, SamplerConfig,
};
use crate::error::{Error, Result};
use crate::model::{
    Ensemble, ExactOracle, FiniteDistribution, GenerativeOracle, OutcomeShape, PromptTable,
    PromptedOracle, TokenModel, TokenModelSpec,
};

pub const REPORT_SCHEMA: &str = "consensus-report/v1";

/// Largest space for which the Pareto audit runs inside a scenario.
const PARETO_SPACE_LIMIT: usize = 64;
const PARETO_RANDOM_CANDIDATES: usize = 2000;
/// Largest decoder range for which the leakage family is built.
const LEAKAGE_MESSAGE_LIMIT: usize = 64;

/// How a reported number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    /// Computed from the exact member distributions.
    Exact,
    /// Estimated from Monte Carlo trials, compared with a tolerance.
    Statistical,
    /// An upper bound; the true value may be smaller.
    BoundOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSection {
    pub status: ClaimStatus,
    /// Per-round acceptance mass (`Z` at zero slack).
    pub acceptance_mass: f64,
    pub abstain_mass: f64,
    pub output_mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSection {
    pub status: ClaimStatus,
    pub trials: u64,
    pub abstain_rate: f64,
    pub mean_rounds_used: Option<f64>,
    pub frequencies: Option<Vec<f64>>,
    pub tv_to_exact: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstentionBound {
    pub status: ClaimStatus,
    pub value: f64,
    /// The `k - s + 1` members whose overlap gives the bound: the best such
    /// set inside the safe-set hint when one of size `s` is given, otherwise
    /// the best over all members (valid for any safe set).
    pub witness: Vec<usize>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstentionSection {
    pub exact: Option<f64>,
    pub empirical: f64,
    pub bound: Option<AbstentionBound>,
}

/// One inequality checked on the exact law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub check: String,
    pub status: ClaimStatus,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets_checked: Option<u64>,
    /// The violating set, on failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSection {
    pub status: ClaimStatus,
    /// Members replaced by the encoder for each message.
    pub encoder_slots: Vec<usize>,
    pub messages: Vec<usize>,
    pub report: LeakageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSection {
    pub status: ClaimStatus,
    pub pass: bool,
    pub report: ParetoReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCalls {
    pub status: ClaimStatus,
    pub draws: u64,
    pub queries: u64,
    pub max_per_invocation: u64,
    /// `(1 + k) R` for a finite budget.
    pub budget_per_invocation: Option<u64>,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub k: usize,
    pub s: usize,
    pub rounds: RoundBudget,
    pub slack: f64,
    pub shape: OutcomeShape,
    pub seed: u64,
    pub trials: u64,
    pub exact: Option<ExactSection>,
    pub empirical: EmpiricalSection,
    pub abstention: AbstentionSection,
    pub overlap: Option<OverlapReport>,
    pub robustness: Vec<Certificate>,
    pub steganography: Vec<StegCertificate>,
    pub leakage: Option<LeakageSection>,
    pub pareto: Option<ParetoSection>,
    pub oracle_calls: OracleCalls,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
    /// Names of every failed check.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub scenarios: Vec<ScenarioReport>,
}

impl Report {
    pub fn new(scenarios: Vec<ScenarioReport>) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            scenarios,
        }
    }

    pub fn violation_count(&self) -> usize {
        self.scenarios.iter().map(|s| s.violations.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock time. Off by default so reports are reproducible
    /// byte for byte.
    pub timings: bool,
}

fn load_token_model(
    spec: &Option<TokenModelSpec>,
    path: &Option<std::path::PathBuf>,
) -> Result<TokenModel> {
    match (spec, path) {
        (Some(spec), None) => TokenModel::from_spec(spec.clone()),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let spec: TokenModelSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            TokenModel::from_spec(spec)
        }
        _ => Err(Error::Config(
            "token_model needs exactly one of spec or path".into(),
        )),
    }
}

fn flat_size(spec: &ModelSpec) -> Option<usize> {
    match spec {
        ModelSpec::Inline { mass } => Some(mass.len()),
        ModelSpec::External { space, .. } => Some(*space),
        ModelSpec::Prompted { table } => table.first().map(Vec::len),
        ModelSpec::Adversary { params, .. } => params.space,
        ModelSpec::TokenModel { .. } => None,
    }
}

/// Realizes every model of a scenario as an oracle.
pub fn build_members(sc: &ScenarioConfig) -> Result<Vec<Arc<dyn GenerativeOracle>>> {
    let space = sc.models.iter().find_map(flat_size);
    sc.models
        .iter()
        .map(|spec| -> Result<Arc<dyn GenerativeOracle>> {
            Ok(match spec {
                ModelSpec::Inline { mass } => {
                    Arc::new(ExactOracle::new(FiniteDistribution::new(mass.clone())?))
                }
                ModelSpec::TokenModel { spec, path } => Arc::new(load_token_model(spec, path)?),
                ModelSpec::External { command, space } => {
                    Arc::new(ExternalOracle::spawn(command, *space)?)
                }
                ModelSpec::Adversary { attack, params } => {
                    let n = space
                        .ok_or_else(|| Error::BadParams("adversary needs a space size".into()))?;
                    build_adversary(*attack, params, n, sc.decoder.as_deref())?
                }
                ModelSpec::Prompted { table } => {
                    let dists = table
                        .iter()
                        .map(|row| FiniteDistribution::new(row.clone()))
                        .collect::<Result<Vec<_>>>()?;
                    let prompt = sc
                        .prompt
                        .ok_or_else(|| Error::Config("prompt tables need a prompt".into()))?;
                    PromptTable::from_distributions(&dists)?.resolve(prompt)?
                }
            })
        })
        .collect()
}

pub fn build_ensemble(sc: &ScenarioConfig) -> Result<Ensemble> {
    sc.validate()?;
    Ensemble::new(build_members(sc)?, sc.s)
}

pub fn sampler_config(sc: &ScenarioConfig) -> Result<SamplerConfig> {
    SamplerConfig::new(sc.rounds, sc.slack)
}

/// The robustness level the exact law is guaranteed to meet: `2^L R` for a
/// finite budget, `2^L / A` for an unbounded one (`A` the acceptance mass).
pub fn guaranteed_level(cfg: &SamplerConfig, acceptance_mass: f64) -> f64 {
    let boost = cfg.slack().exp2();
    match cfg.rounds() {
        RoundBudget::Finite(r) => boost * r as f64,
        RoundBudget::Unbounded if acceptance_mass > 0.0 => boost / acceptance_mass,
        RoundBudget::Unbounded => 0.0,
    }
}

fn certificate_from(name: &str, check: &str, cert: RobustnessCertificate) -> Certificate {
    match cert {
        RobustnessCertificate::Pass { sets_checked } => Certificate {
            name: name.into(),
            check: check.into(),
            status: ClaimStatus::Exact,
            pass: true,
            lhs: None,
            rhs: None,
            sets_checked: Some(sets_checked),
            witness: None,
        },
        RobustnessCertificate::Violation { set, risk, allowed } => Certificate {
            name: name.into(),
            check: check.into(),
            status: ClaimStatus::Exact,
            pass: false,
            lhs: Some(risk),
            rhs: Some(allowed),
            sets_checked: None,
            witness: Some(set.members().to_vec()),
        },
    }
}

fn robustness_certificates(
    sc: &ScenarioConfig,
    law: &OutputLaw,
    dists: &[FiniteDistribution],
    level: f64,
) -> Result<Vec<Certificate>> {
    let n = law.space_size();
    let mut out = Vec::new();
    if n <= MAX_EXHAUSTIVE_SPACE {
        let cert = verify_consensus_robustness(law, dists, sc.s, level, None)?;
        out.push(certificate_from("all", "consensus_robust", cert));
    }
    let hint = sc.safe_set_hint.as_deref().filter(|h| h.len() >= sc.s);
    for (name, members) in &sc.unsafe_sets {
        let set = UnsafeSet::new(members.iter().copied(), n)
            .map_err(|e| Error::Config(format!("unsafe set {name:?}: {e}")))?;
        let cert =
            verify_consensus_robustness(law, dists, sc.s, level, Some(std::slice::from_ref(&set)))?;
        let mut entry = certificate_from(name, "consensus_robust", cert);
        entry.lhs = Some(risk(law, &set));
        out.push(entry);
        if let Some(hint) = hint {
            let eps = hint
                .iter()
                .map(|&i| dists[i].prob_of(set.members().iter().copied()))
                .sum::<f64>()
                / hint.len() as f64;
            let lhs = risk(law, &set);
            let rhs = level * eps;
            let pass = lhs <= rhs + BOUND_TOLERANCE;
            out.push(Certificate {
                name: name.clone(),
                check: "risk_at_most_r_times_safe_mean".into(),
                status: ClaimStatus::Exact,
                pass,
                lhs: Some(lhs),
                rhs: Some(rhs),
                sets_checked: Some(1),
                witness: (!pass).then(|| set.members().to_vec()),
            });
        }
    }
    Ok(out)
}

/// Exact laws `q_m` when the members outside `safe` all encode message `m`.
fn encoder_family(
    sc: &ScenarioConfig,
    dists: &[FiniteDistribution],
    decoder: &Decoder,
    safe: &[usize],
    cfg: &SamplerConfig,
) -> Result<(Vec<usize>, Vec<usize>, MessageFamily)> {
    let slots: Vec<usize> = (0..dists.len()).filter(|i| !safe.contains(i)).collect();
    let messages = decoder.messages();
    let n = decoder.space_size();
    let mut laws = Vec::with_capacity(messages.len());
    for &m in &messages {
        let preimage = decoder.preimage(m);
        let encoder = FiniteDistribution::uniform_on(n, preimage.members())?;
        let mut members = dists.to_vec();
        for &i in &slots {
            members[i] = encoder.clone();
        }
        laws.push(exact_output_law(&members, sc.s, cfg)?);
    }
    Ok((slots, messages, MessageFamily::uniform(laws)?))
}

fn empirical_section(tally: &Tally, exact: Option<&OutputLaw>) -> EmpiricalSection {
    let generated = tally.trials - tally.abstentions;
    let frequencies = tally.frequencies();
    let (tv, tolerance) = match (exact, tally.empirical_law()) {
        (Some(law), Some(emp)) => {
            let tv = law.total_variation(&emp).ok();
            (tv, Some(tv_tolerance(&law.extended_mass(), tally.trials)))
        }
        _ => (None, None),
    };
    EmpiricalSection {
        status: ClaimStatus::Statistical,
        trials: tally.trials,
        abstain_rate: tally.abstain_rate(),
        mean_rounds_used: (generated > 0).then(|| tally.rounds_used as f64 / generated as f64),
        frequencies,
        tv_to_exact: tv,
        tolerance,
        pass: tv.zip(tolerance).map(|(t, tol)| t <= tol),
    }
}

/// Runs one scenario: Monte Carlo trials plus every exact analysis the
/// members allow.
pub fn run_scenario(sc: &ScenarioConfig, options: RunOptions) -> Result<ScenarioReport> {
    let started = Instant::now();
    let ensemble = build_ensemble(sc)?;
    let cfg = sampler_config(sc)?;
    let k = ensemble.k();
    let views = ensemble.exact_views();

    let exact_law = match &views {
        Some(dists) => Some(exact_output_law(dists, sc.s, &cfg)?),
        None => None,
    };
    let acceptance_mass = match &views {
        Some(dists) => Some(
            acceptance_weights(dists, sc.s, cfg.slack())?
                .iter()
                .sum::<f64>(),
        ),
        None => None,
    };
    let exact = exact_law
        .as_ref()
        .zip(acceptance_mass)
        .map(|(law, a)| ExactSection {
            status: ClaimStatus::Exact,
            acceptance_mass: a,
            abstain_mass: law.abstain_mass(),
            output_mass: law.output_mass(),
        });

    let tally = monte_carlo(&ensemble, &cfg, sc.trials, sc.seed)?;
    let empirical = empirical_section(&tally, exact_law.as_ref());

    let mut violations = Vec::new();
    if empirical.pass == Some(false) {
        violations.push("empirical_law".to_string());
    }

    let bound = match (&views, cfg.rounds()) {
        (Some(dists), RoundBudget::Finite(r)) if r >= 1 && 2 * sc.s > k && k <= MAX_SUBSET_K => {
            let safe = match sc.safe_set_hint.as_deref() {
                Some(hint) if hint.len() == sc.s => hint.to_vec(),
                _ => best_abstention_bound(dists, sc.s, r)?.1,
            };
            let value = abstention_bound(dists, sc.s, r, &safe)?;
            let (_, witness) = maximal_overlap(dists, &safe, k - sc.s)?;
            let pass = exact_law
                .as_ref()
                .map(|law| law.abstain_mass() <= value + BOUND_TOLERANCE);
            if pass == Some(false) {
                violations.push("abstention_bound".to_string());
            }
            Some(AbstentionBound {
                status: ClaimStatus::BoundOnly,
                value,
                witness,
                pass,
            })
        }
        _ => None,
    };
    let abstention = AbstentionSection {
        exact: exact_law.as_ref().map(OutputLaw::abstain_mass),
        empirical: tally.abstain_rate(),
        bound,
    };

    let mut overlap = None;
    let mut robustness = Vec::new();
    let mut steganography = Vec::new();
    let mut leakage = None;
    let mut pareto = None;
    if let (Some(dists), Some(law), Some(accept)) = (&views, &exact_law, acceptance_mass) {
        let level = guaranteed_level(&cfg, accept);
        let subset: Vec<usize> = match &sc.safe_set_hint {
            Some(h) => h.clone(),
            None => (0..k).collect(),
        };
        if subset.len() <= MAX_SUBSET_K && !subset.is_empty() {
            overlap = Some(overlap_report(dists, &subset)?);
        }
        robustness = robustness_certificates(sc, law, dists, level)?;
        for c in robustness.iter().filter(|c| !c.pass) {
            violations.push(format!("robustness:{}:{}", c.name, c.check));
        }

        let hint = sc.safe_set_hint.as_deref().filter(|h| h.len() >= sc.s);
        if let (Some(map), Some(hint)) = (&sc.decoder, hint) {
            let decoder = Decoder::new(map.clone())?;
            if decoder.space_size() != law.space_size() {
                return Err(Error::Config(format!(
                    "decoder covers {} outcomes, space has {}",
                    decoder.space_size(),
                    law.space_size()
                )));
            }
            for m in decoder.messages() {
                let cert = steg_certificate(law, dists, hint, &decoder, m, level)?;
                if !cert.pass {
                    violations.push(format!("steganography:{m}"));
                }
                steganography.push(cert);
            }
            let finite = matches!(cfg.rounds(), RoundBudget::Finite(_));
            if finite && hint.len() < k && decoder.messages().len() <= LEAKAGE_MESSAGE_LIMIT {
                let (slots, messages, family) = encoder_family(sc, dists, &decoder, hint, &cfg)?;
                let p = average_distribution(dists, hint)?;
                let report = leakage_audit(&family, &p, level)?;
                if !report.pass() {
                    violations.push("leakage".to_string());
                }
                leakage = Some(LeakageSection {
                    status: ClaimStatus::Exact,
                    encoder_slots: slots,
                    messages,
                    report,
                });
            }
        }

        if law.space_size() <= PARETO_SPACE_LIMIT && cfg.slack() == 0.0 && k <= MAX_SUBSET_K {
            let mut grid = vec![cfg.rounds()];
            if cfg.rounds() != RoundBudget::Unbounded {
                grid.push(RoundBudget::Unbounded);
            }
            let mut rng = chunk_rng(sc.seed, u64::MAX);
            let report = pareto_audit(dists, sc.s, &grid, PARETO_RANDOM_CANDIDATES, &mut rng)?;
            let pass = report.pass();
            if !pass {
                violations.push("pareto".to_string());
            }
            pareto = Some(ParetoSection {
                status: ClaimStatus::Exact,
                pass,
                report,
            });
        }
    }

    let budget = match cfg.rounds() {
        RoundBudget::Finite(r) => Some((1 + k as u64).saturating_mul(r)),
        RoundBudget::Unbounded => None,
    };
    let within_budget = budget.is_none_or(|b| tally.max_calls_per_invocation <= b);
    if !within_budget {
        violations.push("oracle_budget".to_string());
    }
    let oracle_calls = OracleCalls {
        status: ClaimStatus::Exact,
        draws: tally.draws,
        queries: tally.queries,
        max_per_invocation: tally.max_calls_per_invocation,
        budget_per_invocation: budget,
        within_budget,
    };

    Ok(ScenarioReport {
        name: sc.name.clone(),
        k,
        s: sc.s,
        rounds: sc.rounds,
        slack: sc.slack,
        shape: ensemble.shape(),
        seed: sc.seed,
        trials: sc.trials,
        exact,
        empirical,
        abstention,
        overlap,
        robustness,
        steganography,
        leakage,
        pareto,
        oracle_calls,
        wall_clock_ms: options
            .timings
            .then(|| started.elapsed().as_secs_f64() * 1e3),
        violations,
    })
}

/// Runs every scenario of a file, in order.
pub fn run_file(file: &ScenarioFile, options: RunOptions) -> Result<Report> {
    let scenarios = file
        .scenarios
        .iter()
        .map(|sc| run_scenario(sc, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::new(scenarios))
}

pub fn run_path(path: &Path, options: RunOptions) -> Result<Report> {
    run_file(&ScenarioFile::load(path)?, options)
}
