//! A sampler whose only dependence on the members outside a fixed safe set
//! is a single index `t ∈ {1, .., R+1}`.
//!
//! `R` candidates are drawn i.i.d. from the uniform mixture of the safe
//! members, then scanned in order; candidate `y_t` is kept with probability
//! `Σ_{i<=s} p_(i)(y_t) / Σ_{i∈S} p_i(y_t)`. The first kept candidate is
//! returned, or `⊥` if none is. Its law coincides with the consensus sampler.

use rand::{Rng, RngCore};

use super::subsets::check_indices;
use crate::consensus::{check_s, lower_mean, probability_columns, OutputLaw, SampleResult};
use crate::error::{Error, Result};
use crate::model::{sample_index, FiniteDistribution, Outcome, ENUMERATION_LIMIT};

fn keep_probabilities(columns: &[Vec<f64>], safe_set: &[usize], s: usize) -> Vec<f64> {
    columns
        .iter()
        .map(|col| {
            let safe_sum: f64 = safe_set.iter().map(|&i| col[i]).sum();
            if safe_sum > 0.0 {
                (lower_mean(col, s) * s as f64 / safe_sum).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn safe_mixture(columns: &[Vec<f64>], safe_set: &[usize]) -> Vec<f64> {
    columns
        .iter()
        .map(|col| safe_set.iter().map(|&i| col[i]).sum::<f64>() / safe_set.len() as f64)
        .collect()
}

fn validate(
    distributions: &[FiniteDistribution],
    safe_set: &[usize],
    s: usize,
) -> Result<Vec<Vec<f64>>> {
    let columns = probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    check_indices(safe_set, distributions.len())?;
    if safe_set.len() != s {
        return Err(Error::InvalidSubset(format!(
            "safe set has {} members, s = {s}",
            safe_set.len()
        )));
    }
    Ok(columns)
}

pub fn simulate_safe_only(
    distributions: &[FiniteDistribution],
    safe_set: &[usize],
    s: usize,
    rounds: u64,
    rng: &mut dyn RngCore,
) -> Result<SampleResult> {
    let columns = validate(distributions, safe_set, s)?;
    let mixture = safe_mixture(&columns, safe_set);
    let keep = keep_probabilities(&columns, safe_set, s);
    let candidates: Vec<usize> = (0..rounds)
        .map(|_| sample_index(&mixture, rng.random()))
        .collect();
    for (t, &y) in candidates.iter().enumerate() {
        let u: f64 = rng.random();
        if u < keep[y] {
            return Ok(SampleResult::Generated {
                outcome: Outcome::Index(y),
                rounds_used: t as u64 + 1,
            });
        }
    }
    Ok(SampleResult::Abstain)
}

/// Law of [`simulate_safe_only`], by summing over all `|Y|^R` candidate
/// tuples.
pub fn simulation_law(
    distributions: &[FiniteDistribution],
    safe_set: &[usize],
    s: usize,
    rounds: u64,
) -> Result<OutputLaw> {
    let columns = validate(distributions, safe_set, s)?;
    let n = columns.len();
    let tuples = u32::try_from(rounds)
        .ok()
        .and_then(|r| n.checked_pow(r))
        .filter(|&t| t <= ENUMERATION_LIMIT)
        .ok_or_else(|| Error::TooLarge(format!("|Y|^R with |Y| = {n}, R = {rounds}")))?;
    let mixture = safe_mixture(&columns, safe_set);
    let keep = keep_probabilities(&columns, safe_set, s);
    let r = rounds as usize;

    let mut output = vec![0.0; n];
    let mut tuple = vec![0usize; r];
    for _ in 0..tuples {
        let weight: f64 = tuple.iter().map(|&y| mixture[y]).product();
        if weight > 0.0 {
            let mut survive = 1.0;
            for &y in &tuple {
                output[y] += weight * survive * keep[y];
                survive *= 1.0 - keep[y];
            }
        }
        // Advance the odometer.
        for slot in tuple.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    OutputLaw::from_output_mass(&output)
}
