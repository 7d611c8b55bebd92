//! Pareto audit of the abstention / worst-case-robustness trade-off.
//!
//! A law `ν` on `Y ∪ {⊥}` is scored by `(ν(⊥), R_ν)`; lower is better in
//! both. The laws on the frontier are exactly those proportional to jinx on
//! `Y`, and the audit checks this both analytically and by searching for a
//! dominating candidate.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::robustness::{robustness_from_masses, Robustness};
use crate::consensus::{
    check_s, exact_output_law, lower_mean, probability_columns, RoundBudget, SamplerConfig,
};
use crate::error::{Error, Result};
use crate::model::FiniteDistribution;

/// Two laws closer than this in total variation are treated as equal.
pub const LAW_EQUALITY_TOLERANCE: f64 = 1e-9;
/// Slack allowed when comparing scores.
const SCORE_TOLERANCE: f64 = 1e-12;
/// Largest `|Y| + 1` for which the regular simplex grid is included.
const GRID_MAX_DIMENSION: usize = 6;
const GRID_STEPS: usize = 8;

/// `(ν(⊥), R_ν)` of an extended mass vector (⊥ last).
fn score(extended: &[f64], lower: &[f64]) -> (f64, Robustness) {
    let n = lower.len();
    (extended[n], robustness_from_masses(&extended[..n], lower))
}

/// Whether score `a` weakly dominates score `b` up to rounding.
fn weakly_dominates(a: (f64, Robustness), b: (f64, Robustness)) -> bool {
    if a.0 > b.0 + SCORE_TOLERANCE {
        return false;
    }
    match (a.1, b.1) {
        (Robustness::Finite(x), Robustness::Finite(y)) => x <= y + SCORE_TOLERANCE * y.max(1.0),
        (_, Robustness::Infinite) => true,
        (Robustness::Infinite, Robustness::Finite(_)) => false,
    }
}

fn extended_tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `ν(y) = ν(Y) · jinx(y)` for every `y`, within [`LAW_EQUALITY_TOLERANCE`].
pub fn is_jinx_proportional(extended: &[f64], jinx: Option<&[f64]>) -> bool {
    let n = extended.len() - 1;
    let out: f64 = extended[..n].iter().sum();
    match jinx {
        Some(j) => extended[..n]
            .iter()
            .zip(j)
            .all(|(v, jy)| (v - out * jy).abs() <= LAW_EQUALITY_TOLERANCE),
        None => out <= LAW_EQUALITY_TOLERANCE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRound {
    pub rounds: RoundBudget,
    pub abstain_mass: f64,
    pub robustness: Robustness,
    /// `q(Y) / Z`, the value the trade-off predicts for `R_q`.
    pub predicted_robustness: Option<f64>,
    pub candidates: usize,
    /// First candidate (extended mass, ⊥ last) that dominates the law.
    pub dominated_by: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub z: f64,
    /// `Z = 0`: the only law with finite robustness is the one that always
    /// abstains.
    pub degenerate: bool,
    pub rounds: Vec<ParetoRound>,
    pub candidates_checked: usize,
    /// Candidates whose optimality disagrees with jinx-proportionality.
    pub characterization_violations: usize,
    /// Candidates with `R_ν ≠ ν(Y) · R_{ν'}`.
    pub scaling_violations: usize,
}

impl ParetoReport {
    pub fn pass(&self) -> bool {
        self.characterization_violations == 0
            && self.scaling_violations == 0
            && self.rounds.iter().all(|r| {
                r.dominated_by.is_none()
                    && match r.predicted_robustness {
                        Some(p) => (r.robustness.value() - p).abs() <= 1e-9 * p.max(1.0),
                        None => r.robustness == Robustness::Finite(0.0),
                    }
            })
    }
}

/// Random point of the simplex with `dim` coordinates (flat Dirichlet).
fn dirichlet(dim: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Dirichlet point restricted to a random nonempty support.
fn sparse(dim: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut v = dirichlet(dim, rng);
    let keep = rng.random_range(0..dim);
    for (i, x) in v.iter_mut().enumerate() {
        if i != keep && rng.random_bool(0.5) {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// All points of the simplex with coordinates in multiples of `1/steps`.
fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn fill(left: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=left {
            prefix.push(first);
            fill(left - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    fill(steps, dim, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / steps as f64).collect())
        .collect()
}

fn with_abstain(output: &[f64], abstain: f64) -> Vec<f64> {
    let mut v: Vec<f64> = output.iter().map(|x| x * (1.0 - abstain)).collect();
    v.push(abstain);
    v
}

/// Candidates that do not depend on the round budget.
fn base_candidates(
    distributions: &[FiniteDistribution],
    jinx: Option<&[f64]>,
    random: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    let n = distributions[0].len();
    let dim = n + 1;
    let mut out = Vec::new();
    if dim <= GRID_MAX_DIMENSION {
        out.extend(simplex_grid(dim, GRID_STEPS));
    }
    for p in distributions {
        out.push(with_abstain(p.mass(), 0.0));
        out.push(with_abstain(p.mass(), 0.5));
    }
    if let Ok(median) = crate::consensus::median_distribution(distributions) {
        out.push(with_abstain(median.mass(), 0.0));
    }
    let uniform = vec![1.0 / distributions.len() as f64; distributions.len()];
    out.push(with_abstain(
        crate::model::mixture(distributions, &uniform)?.mass(),
        0.0,
    ));
    let mut always = vec![0.0; n];
    always.push(1.0);
    out.push(always);
    if let Some(j) = jinx {
        for t in 0..=GRID_STEPS {
            out.push(with_abstain(j, t as f64 / GRID_STEPS as f64));
        }
    }
    for i in 0..random {
        out.push(if i % 4 == 3 {
            sparse(dim, rng)
        } else {
            dirichlet(dim, rng)
        });
    }
    Ok(out)
}

/// Candidates close to the law under audit, where a search is most likely to
/// find a dominating law if one existed.
fn local_candidates(law: &[f64], count: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
    let dim = law.len();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = 10f64.powi(-((i % 9) as i32 + 1));
        let noise = if i % 2 == 0 {
            dirichlet(dim, rng)
        } else {
            sparse(dim, rng)
        };
        out.push(
            law.iter()
                .zip(&noise)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        );
    }
    // Move a little mass between ⊥ and each outcome.
    let n = dim - 1;
    for y in 0..n {
        for delta in [1e-6f64, 1e-3] {
            let mut up = law.to_vec();
            let moved = delta.min(up[n]);
            up[y] += moved;
            up[n] -= moved;
            out.push(up);
            let mut down = law.to_vec();
            let moved = delta.min(down[y]);
            down[y] -= moved;
            down[n] += moved;
            out.push(down);
        }
    }
    out
}

#[derive(Default)]
struct Tally {
    checked: usize,
    characterization: usize,
    scaling: usize,
}

/// Checks the scaling identity and the characterization on one candidate.
fn audit_candidate(cand: &[f64], lower: &[f64], z: f64, jinx: Option<&[f64]>, tally: &mut Tally) {
    tally.checked += 1;
    let n = cand.len() - 1;
    let out: f64 = cand[..n].iter().sum();
    let r = robustness_from_masses(&cand[..n], lower);
    if out > 0.0 {
        let conditional: Vec<f64> = cand[..n].iter().map(|x| x / out).collect();
        let r_cond = robustness_from_masses(&conditional, lower);
        let scaled_ok = match (r, r_cond) {
            (Robustness::Finite(a), Robustness::Finite(b)) => {
                (a - out * b).abs() <= 1e-9 * a.max(1.0)
            }
            (Robustness::Infinite, Robustness::Infinite) => true,
            _ => false,
        };
        tally.scaling += usize::from(!scaled_ok);
    }
    // R_ν >= ν(Y)/Z always, and strictly unless ν is jinx-proportional,
    // in which case ν(Y)·jinx dominates ν.
    let violated = match (jinx, r) {
        (Some(_), Robustness::Finite(v)) => {
            let floor = out / z;
            v < floor * (1.0 - 1e-12) - 1e-15 || (!is_jinx_proportional(cand, jinx) && v <= floor)
        }
        (Some(_), Robustness::Infinite) => false,
        (None, Robustness::Finite(v)) => out > 0.0 || v != 0.0,
        (None, Robustness::Infinite) => out <= 0.0,
    };
    tally.characterization += usize::from(violated);
}

/// Audits the consensus law at each budget in `grid` against
/// `random_candidates` random laws plus grid and targeted candidates.
pub fn pareto_audit(
    distributions: &[FiniteDistribution],
    s: usize,
    grid: &[RoundBudget],
    random_candidates: usize,
    rng: &mut dyn RngCore,
) -> Result<ParetoReport> {
    let columns = probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty round grid".into()));
    }
    let lower: Vec<f64> = columns.iter().map(|c| lower_mean(c, s)).collect();
    let z: f64 = lower.iter().sum();
    let degenerate = z <= 0.0;
    let jinx: Option<Vec<f64>> = (!degenerate).then(|| lower.iter().map(|g| g / z).collect());

    let base = base_candidates(distributions, jinx.as_deref(), random_candidates, rng)?;
    let mut tally = Tally::default();
    for cand in &base {
        audit_candidate(cand, &lower, z, jinx.as_deref(), &mut tally);
    }
    // Jinx-proportional laws sit exactly on the floor.
    if let Some(j) = &jinx {
        for t in 0..=GRID_STEPS {
            let abstain = t as f64 / GRID_STEPS as f64;
            let (_, r) = score(&with_abstain(j, abstain), &lower);
            let floor = (1.0 - abstain) / z;
            if (r.value() - floor).abs() > 1e-9 * floor.max(1.0) {
                tally.characterization += 1;
            }
        }
    }

    let mut rounds = Vec::with_capacity(grid.len());
    for &budget in grid {
        let law = exact_output_law(distributions, s, &SamplerConfig::new(budget, 0.0)?)?;
        let extended = law.extended_mass();
        let law_score = score(&extended, &lower);
        let local = local_candidates(&extended, 256, rng);
        for cand in &local {
            audit_candidate(cand, &lower, z, jinx.as_deref(), &mut tally);
        }
        let dominated_by = base
            .iter()
            .chain(&local)
            .find(|cand| {
                extended_tv(cand, &extended) > LAW_EQUALITY_TOLERANCE
                    && weakly_dominates(score(cand, &lower), law_score)
            })
            .cloned();
        rounds.push(ParetoRound {
            rounds: budget,
            abstain_mass: law.abstain_mass(),
            robustness: law_score.1,
            predicted_robustness: (!degenerate).then(|| law.output_rate() / z),
            candidates: base.len() + local.len(),
            dominated_by,
        });
    }

    Ok(ParetoReport {
        z,
        degenerate,
        rounds,
        candidates_checked: tally.checked,
        characterization_violations: tally.characterization,
        scaling_violations: tally.scaling,
    })
}
