use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::space::OutputSpace;
use crate::error::{Error, Result};

/// Normalization tolerance for probability vectors supplied by callers.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Normalization tolerance for vectors computed by this crate.
pub const DERIVED_TOLERANCE: f64 = 1e-6;

/// An exact probability vector over a finite [`OutputSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    space: OutputSpace,
    mass: Vec<f64>,
}

impl FiniteDistribution {
    /// Validates `mass` as a distribution on `{0, .., mass.len()-1}`.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        let space = OutputSpace::new(mass.len().max(1))?;
        Self::on_space(space, mass)
    }

    pub fn on_space(space: OutputSpace, mass: Vec<f64>) -> Result<Self> {
        Self::checked(space, mass, INPUT_TOLERANCE)
    }

    /// Like [`FiniteDistribution::new`] but with the looser tolerance used for
    /// quantities that were themselves computed (accumulated rounding).
    pub fn from_derived(mass: Vec<f64>) -> Result<Self> {
        let space = OutputSpace::new(mass.len().max(1))?;
        Self::checked(space, mass, DERIVED_TOLERANCE)
    }

    fn checked(space: OutputSpace, mass: Vec<f64>, tolerance: f64) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if mass.len() != space.size() {
            return Err(Error::SpaceMismatch {
                expected: format!("|Y| = {}", space.size()),
                found: format!("{} masses", mass.len()),
            });
        }
        for (index, &value) in mass.iter().enumerate() {
            if value.is_nan() || value.is_infinite() {
                return Err(Error::NonFiniteMass { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { sum, tolerance });
        }
        Ok(Self { space, mass })
    }

    /// Normalizes a non-negative weight vector with positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::NotNormalized {
                sum: total,
                tolerance: DERIVED_TOLERANCE,
            });
        }
        Self::from_derived(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn point_mass(size: usize, at: usize) -> Result<Self> {
        if at >= size {
            return Err(Error::OutcomeOutOfRange(at.to_string()));
        }
        let mut mass = vec![0.0; size];
        mass[at] = 1.0;
        Self::new(mass)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDistribution);
        }
        Self::new(vec![1.0 / size as f64; size])
    }

    /// Uniform over `support`, zero elsewhere.
    pub fn uniform_on(size: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut mass = vec![0.0; size];
        for &y in support {
            if y >= size {
                return Err(Error::OutcomeOutOfRange(y.to_string()));
            }
            mass[y] = 1.0;
        }
        Self::from_weights(mass)
    }

    pub fn space(&self) -> &OutputSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `p(y)`, zero outside the space.
    pub fn prob(&self, y: usize) -> f64 {
        self.mass.get(y).copied().unwrap_or(0.0)
    }

    /// `p(U) = sum of p(y) over y in U`.
    pub fn prob_of(&self, set: impl IntoIterator<Item = usize>) -> f64 {
        set.into_iter().map(|y| self.prob(y)).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.mass.len())
            .filter(|&y| self.mass[y] > 0.0)
            .collect()
    }

    /// Inverse-CDF draw. Never returns a zero-mass outcome.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        sample_index(&self.mass, u)
    }

    pub fn total_variation(&self, other: &FiniteDistribution) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        Ok(0.5
            * self
                .mass
                .iter()
                .zip(&other.mass)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Validates a caller-supplied probability vector.
pub fn validate_distribution(mass: &[f64]) -> Result<FiniteDistribution> {
    FiniteDistribution::new(mass.to_vec())
}

/// Pointwise weighted average of distributions over one space.
pub fn mixture(
    distributions: &[FiniteDistribution],
    weights: &[f64],
) -> Result<FiniteDistribution> {
    let first = distributions.first().ok_or(Error::EmptyDistribution)?;
    let weights = FiniteDistribution::new(weights.to_vec())?;
    if weights.len() != distributions.len() {
        return Err(Error::SpaceMismatch {
            expected: format!("{} weights", distributions.len()),
            found: format!("{} weights", weights.len()),
        });
    }
    let mut mass = vec![0.0; first.len()];
    for (dist, &w) in distributions.iter().zip(weights.mass()) {
        first.space().ensure_same(dist.space())?;
        for (acc, &p) in mass.iter_mut().zip(dist.mass()) {
            *acc += w * p;
        }
    }
    FiniteDistribution::checked(first.space().clone(), mass, INPUT_TOLERANCE)
}

/// Index selected by `u in [0, 1)` under inverse-CDF sampling of `weights`
/// (which need only be non-negative with positive total).
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}
