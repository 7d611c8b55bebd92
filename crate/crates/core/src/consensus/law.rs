//! Exact laws induced by consensus sampling on enumerable instances.

use serde::{Deserialize, Serialize};

use super::sampler::{RoundBudget, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, DERIVED_TOLERANCE};

/// Sorts `values` ascending: `p_(1) <= p_(2) <= .. <= p_(k)`.
pub fn order_statistics(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

/// Mean of the `s` smallest entries.
pub fn lower_mean(values: &[f64], s: usize) -> f64 {
    let sorted = order_statistics(values);
    sorted[..s].iter().sum::<f64>() / s as f64
}

/// Validates a list of distributions over one space and returns, for every
/// outcome `y`, the column `(p_1(y), .., p_k(y))`.
pub fn probability_columns(distributions: &[FiniteDistribution]) -> Result<Vec<Vec<f64>>> {
    let first = distributions
        .first()
        .ok_or_else(|| Error::InvalidEnsemble("no distributions".into()))?;
    for d in &distributions[1..] {
        first.space().ensure_same(d.space())?;
    }
    Ok((0..first.len())
        .map(|y| distributions.iter().map(|d| d.prob(y)).collect())
        .collect())
}

pub(crate) fn check_s(s: usize, k: usize) -> Result<()> {
    if s == 0 || s > k {
        return Err(Error::InvalidEnsemble(format!(
            "s = {s} must lie in 1..={k}"
        )));
    }
    Ok(())
}

/// Normalizer `Z` and the jinx distribution `g / Z`, where `g(y)` is the mean
/// of the `s` smallest member probabilities at `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JinxResult {
    pub z: f64,
    pub jinx: Option<FiniteDistribution>,
    /// Unnormalized consensus mass `g(y)`; sums to `z`.
    pub consensus: Vec<f64>,
}

pub fn jinx_distribution(distributions: &[FiniteDistribution], s: usize) -> Result<JinxResult> {
    let columns = probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    let consensus: Vec<f64> = columns.iter().map(|col| lower_mean(col, s)).collect();
    let z: f64 = consensus.iter().sum();
    let jinx = if z > 0.0 {
        Some(FiniteDistribution::from_derived(
            consensus.iter().map(|g| g / z).collect(),
        )?)
    } else {
        None
    };
    Ok(JinxResult { z, jinx, consensus })
}

/// Pointwise lower median of the member probabilities, normalized.
pub fn median_distribution(distributions: &[FiniteDistribution]) -> Result<FiniteDistribution> {
    let columns = probability_columns(distributions)?;
    let rank = (distributions.len() - 1) / 2;
    let medians: Vec<f64> = columns
        .iter()
        .map(|col| order_statistics(col)[rank])
        .collect();
    let total: f64 = medians.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateMedian);
    }
    FiniteDistribution::from_derived(medians.into_iter().map(|d| d / total).collect())
}

/// A law over `Y ∪ {⊥}`: abstain with `abstain_mass`, otherwise draw from
/// `conditional`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLaw {
    abstain_mass: f64,
    conditional: Option<FiniteDistribution>,
    space_size: usize,
}

impl OutputLaw {
    pub fn new(abstain_mass: f64, conditional: FiniteDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&abstain_mass) {
            return Err(Error::NotNormalized {
                sum: abstain_mass,
                tolerance: 0.0,
            });
        }
        Ok(Self {
            abstain_mass,
            space_size: conditional.len(),
            conditional: Some(conditional),
        })
    }

    pub fn always_abstain(space_size: usize) -> Self {
        Self {
            abstain_mass: 1.0,
            conditional: None,
            space_size,
        }
    }

    /// A law that never abstains.
    pub fn generating(dist: FiniteDistribution) -> Self {
        Self {
            abstain_mass: 0.0,
            space_size: dist.len(),
            conditional: Some(dist),
        }
    }

    /// Builds a law from its (sub-normalized) masses on `Y`; the deficit is
    /// the abstention mass.
    pub fn from_output_mass(mass: &[f64]) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &value) in mass.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteMass { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let rate: f64 = mass.iter().sum();
        if rate > 1.0 + DERIVED_TOLERANCE {
            return Err(Error::NotNormalized {
                sum: rate,
                tolerance: DERIVED_TOLERANCE,
            });
        }
        if rate == 0.0 {
            return Ok(Self::always_abstain(mass.len()));
        }
        let conditional = FiniteDistribution::from_weights(mass.to_vec())?;
        Self::new((1.0 - rate).clamp(0.0, 1.0), conditional)
    }

    /// Builds a law from masses on `Y` followed by the mass of `⊥`.
    pub fn from_extended(extended: &[f64]) -> Result<Self> {
        let (abstain, output) = extended.split_last().ok_or(Error::EmptyDistribution)?;
        let total: f64 = extended.iter().sum();
        if (total - 1.0).abs() > DERIVED_TOLERANCE {
            return Err(Error::NotNormalized {
                sum: total,
                tolerance: DERIVED_TOLERANCE,
            });
        }
        if *abstain < 0.0 {
            return Err(Error::NegativeMass {
                index: output.len(),
                value: *abstain,
            });
        }
        Self::from_output_mass(output)
    }

    pub fn abstain_mass(&self) -> f64 {
        self.abstain_mass
    }

    /// `q(Y) = 1 - q(⊥)`.
    pub fn output_rate(&self) -> f64 {
        1.0 - self.abstain_mass
    }

    pub fn conditional(&self) -> Option<&FiniteDistribution> {
        self.conditional.as_ref()
    }

    pub fn space_size(&self) -> usize {
        self.space_size
    }

    /// `q(y)` for `y` in `Y`.
    pub fn mass(&self, y: usize) -> f64 {
        match &self.conditional {
            Some(c) => self.output_rate() * c.prob(y),
            None => 0.0,
        }
    }

    /// `(q(y))_y` over `Y` (sums to the output rate).
    pub fn output_mass(&self) -> Vec<f64> {
        (0..self.space_size).map(|y| self.mass(y)).collect()
    }

    /// Masses on `Y` followed by `q(⊥)`.
    pub fn extended_mass(&self) -> Vec<f64> {
        let mut v = self.output_mass();
        v.push(self.abstain_mass);
        v
    }

    /// Total variation over `Y ∪ {⊥}`.
    pub fn total_variation(&self, other: &OutputLaw) -> Result<f64> {
        if self.space_size != other.space_size {
            return Err(Error::SpaceMismatch {
                expected: format!("|Y| = {}", self.space_size),
                found: format!("|Y| = {}", other.space_size),
            });
        }
        Ok(0.5
            * self
                .extended_mass()
                .iter()
                .zip(other.extended_mass())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Per-round probability of proposing and accepting each outcome:
/// `f(y) · min{1, 2^L g(y) / f(y)} = min{f(y), 2^L g(y)}`, which is `g(y)`
/// when `L = 0`.
pub fn acceptance_weights(
    distributions: &[FiniteDistribution],
    s: usize,
    slack: f64,
) -> Result<Vec<f64>> {
    let columns = probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    let boost = slack.exp2();
    Ok(columns
        .iter()
        .map(|col| {
            let g = lower_mean(col, s);
            if slack == 0.0 {
                g
            } else {
                let f = col.iter().sum::<f64>() / col.len() as f64;
                f.min(boost * g)
            }
        })
        .collect())
}

/// Exact law of the consensus sampler. At zero slack this is
/// `q(⊥) = (1 - Z)^R`, `q(y) = (1 - q(⊥)) · jinx(y)`.
pub fn exact_output_law(
    distributions: &[FiniteDistribution],
    s: usize,
    cfg: &SamplerConfig,
) -> Result<OutputLaw> {
    let weights = acceptance_weights(distributions, s, cfg.slack())?;
    let space_size = weights.len();
    let accept: f64 = weights.iter().sum();
    let abstain = match cfg.rounds() {
        RoundBudget::Finite(r) => abstain_after(accept, r),
        RoundBudget::Unbounded if accept > 0.0 => 0.0,
        RoundBudget::Unbounded => 1.0,
    };
    if accept <= 0.0 {
        return Ok(OutputLaw::always_abstain(space_size));
    }
    let conditional =
        FiniteDistribution::from_derived(weights.iter().map(|w| w / accept).collect())?;
    OutputLaw::new(abstain, conditional)
}

/// `(1 - accept)^rounds`.
pub(crate) fn abstain_after(accept: f64, rounds: u64) -> f64 {
    let miss = (1.0 - accept).clamp(0.0, 1.0);
    match i32::try_from(rounds) {
        Ok(r) => miss.powi(r),
        Err(_) => miss.powf(rounds as f64),
    }
}
