//! Risk, consensus robustness, worst-case robustness and abstention bounds.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use super::overlap::maximal_overlap;
use super::subsets::{check_indices, check_subset_k, subsets};
use crate::consensus::{abstain_after, check_s, lower_mean, probability_columns, OutputLaw};
use crate::error::{Error, Result};
use crate::model::FiniteDistribution;

/// Absolute slack allowed when comparing two sides of a robustness bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Largest `|Y|` for which every unsafe set is enumerated.
pub const MAX_EXHAUSTIVE_SPACE: usize = 20;

/// A set `U ⊆ Y` of unsafe outcomes (sorted, without repeats).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnsafeSet(Vec<usize>);

impl UnsafeSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, space_size: usize) -> Result<Self> {
        let mut members: Vec<usize> = indices.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&y| y >= space_size) {
            return Err(Error::OutcomeOutOfRange(format!(
                "unsafe outcome {bad} (|Y| = {space_size})"
            )));
        }
        Ok(Self(members))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// The set whose members are the set bits of `mask`.
    pub fn from_mask(mask: u64, space_size: usize) -> Self {
        Self((0..space_size).filter(|&y| mask >> y & 1 == 1).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, y: usize) -> bool {
        self.0.binary_search(&y).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A robustness level that may be `+∞`. Serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Robustness {
    Finite(f64),
    Infinite,
}

impl Robustness {
    pub fn value(&self) -> f64 {
        match self {
            Robustness::Finite(v) => *v,
            Robustness::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Robustness::Finite(_))
    }

    /// `self <= other`, up to a relative tolerance.
    pub fn at_most(&self, other: &Robustness, tolerance: f64) -> bool {
        match (self, other) {
            (_, Robustness::Infinite) => true,
            (Robustness::Infinite, Robustness::Finite(_)) => false,
            (Robustness::Finite(a), Robustness::Finite(b)) => {
                *a <= b + tolerance * b.abs().max(1.0)
            }
        }
    }

    fn max(self, other: Robustness) -> Robustness {
        match (self, other) {
            (Robustness::Finite(a), Robustness::Finite(b)) => Robustness::Finite(a.max(b)),
            _ => Robustness::Infinite,
        }
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Robustness::Finite(v) => write!(f, "{v}"),
            Robustness::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Robustness {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Robustness::Finite(v) => serializer.serialize_f64(*v),
            Robustness::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Robustness {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(deserializer)? {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Robustness::Finite)
                .ok_or_else(|| de::Error::custom("bad number")),
            serde_json::Value::String(s) if s == "inf" => Ok(Robustness::Infinite),
            other => Err(de::Error::custom(format!(
                "expected number or \"inf\", got {other}"
            ))),
        }
    }
}

/// `q(U)`; abstention contributes nothing.
pub fn risk(law: &OutputLaw, unsafe_set: &UnsafeSet) -> f64 {
    unsafe_set.members().iter().map(|&y| law.mass(y)).sum()
}

/// Outcome of checking `q(U) <= R · (1/s) Σ_{i<=s} p_(i)(U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RobustnessCertificate {
    Pass {
        sets_checked: u64,
    },
    Violation {
        set: UnsafeSet,
        risk: f64,
        allowed: f64,
    },
}

impl RobustnessCertificate {
    pub fn is_pass(&self) -> bool {
        matches!(self, RobustnessCertificate::Pass { .. })
    }
}

/// Right-hand side of consensus robustness for one set: `R` times the mean of
/// the `s` smallest set probabilities `p_j(U)`.
pub fn robustness_allowance(set_probs: &[f64], s: usize, rounds: f64) -> f64 {
    rounds * lower_mean(set_probs, s)
}

/// Checks consensus robustness of `law` with parameter `rounds` on the given
/// unsafe sets, or on all `2^|Y|` sets when `sets` is `None`.
pub fn verify_consensus_robustness(
    law: &OutputLaw,
    distributions: &[FiniteDistribution],
    s: usize,
    rounds: f64,
    sets: Option<&[UnsafeSet]>,
) -> Result<RobustnessCertificate> {
    probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    let n = law.space_size();
    if distributions[0].len() != n {
        return Err(Error::SpaceMismatch {
            expected: format!("|Y| = {n}"),
            found: format!("|Y| = {}", distributions[0].len()),
        });
    }
    match sets {
        Some(sets) => {
            let mut probs = vec![0.0; distributions.len()];
            for set in sets {
                for (slot, d) in probs.iter_mut().zip(distributions) {
                    *slot = d.prob_of(set.members().iter().copied());
                }
                let lhs = risk(law, set);
                let rhs = robustness_allowance(&probs, s, rounds);
                if lhs > rhs + BOUND_TOLERANCE {
                    return Ok(RobustnessCertificate::Violation {
                        set: set.clone(),
                        risk: lhs,
                        allowed: rhs,
                    });
                }
            }
            Ok(RobustnessCertificate::Pass {
                sets_checked: sets.len() as u64,
            })
        }
        None => {
            if n > MAX_EXHAUSTIVE_SPACE {
                return Err(Error::TooLarge(format!(
                    "|Y| = {n} exceeds {MAX_EXHAUSTIVE_SPACE} for exhaustive unsafe sets"
                )));
            }
            let law_mass = law.output_mass();
            let mut rows: Vec<&[f64]> = distributions.iter().map(|d| d.mass()).collect();
            rows.push(&law_mass);
            let table = SubsetSums::new(&rows);
            let k = distributions.len();
            let mut probs = vec![0.0; k];
            for mask in 0..(1u64 << n) {
                for (j, slot) in probs.iter_mut().enumerate() {
                    *slot = table.sum(j, mask);
                }
                let lhs = table.sum(k, mask);
                let rhs = robustness_allowance(&probs, s, rounds);
                if lhs > rhs + BOUND_TOLERANCE {
                    return Ok(RobustnessCertificate::Violation {
                        set: UnsafeSet::from_mask(mask, n),
                        risk: lhs,
                        allowed: rhs,
                    });
                }
            }
            Ok(RobustnessCertificate::Pass {
                sets_checked: 1u64 << n,
            })
        }
    }
}

/// Set probabilities for every subset of a small space, split into a low and
/// a high half so that each lookup is a single addition.
pub struct SubsetSums {
    low_bits: usize,
    low: Vec<Vec<f64>>,
    high: Vec<Vec<f64>>,
}

impl SubsetSums {
    pub fn new(rows: &[&[f64]]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let low_bits = n / 2;
        let expand = |values: &[f64]| -> Vec<f64> {
            let mut sums = vec![0.0; 1 << values.len()];
            for mask in 1..sums.len() {
                let bit = mask.trailing_zeros() as usize;
                sums[mask] = sums[mask & (mask - 1)] + values[bit];
            }
            sums
        };
        Self {
            low_bits,
            low: rows.iter().map(|r| expand(&r[..low_bits])).collect(),
            high: rows.iter().map(|r| expand(&r[low_bits..])).collect(),
        }
    }

    /// `Σ_{y ∈ mask} rows[row][y]`.
    pub fn sum(&self, row: usize, mask: u64) -> f64 {
        let lo = (mask & ((1u64 << self.low_bits) - 1)) as usize;
        let hi = (mask >> self.low_bits) as usize;
        self.low[row][lo] + self.high[row][hi]
    }
}

/// Worst-case robustness from masses on `Y` and the per-outcome lower means
/// `(1/s) Σ_{i<=s} p_(i)(y)`, with `0/0 = 0`.
pub fn robustness_from_masses(output_mass: &[f64], lower_means: &[f64]) -> Robustness {
    output_mass
        .iter()
        .zip(lower_means)
        .fold(Robustness::Finite(0.0), |acc, (&q, &g)| {
            let term = if q <= 0.0 {
                Robustness::Finite(0.0)
            } else if g <= 0.0 {
                Robustness::Infinite
            } else {
                Robustness::Finite(q / g)
            };
            acc.max(term)
        })
}

/// `R_q = max_y max_{|S|=s} q(y) / avg_S(y)`. The inner maximum is attained
/// by the `s` members with the smallest `p_i(y)`, so no subset enumeration
/// is needed.
pub fn worst_case_robustness(
    law: &OutputLaw,
    distributions: &[FiniteDistribution],
    s: usize,
) -> Result<Robustness> {
    let columns = probability_columns(distributions)?;
    check_s(s, distributions.len())?;
    let lower: Vec<f64> = columns.iter().map(|c| lower_mean(c, s)).collect();
    Ok(robustness_from_masses(&law.output_mass(), &lower))
}

/// `max_y q(y) / p(y)`: the least `R` for which `q` is `R`-risky relative
/// to `p`.
pub fn risky_ratio(law: &OutputLaw, p: &FiniteDistribution) -> Robustness {
    robustness_from_masses(&law.output_mass(), p.mass())
}

/// `avg_S(y) = (1/|S|) Σ_{i∈S} p_i(y)`.
pub fn average_distribution(
    distributions: &[FiniteDistribution],
    subset: &[usize],
) -> Result<FiniteDistribution> {
    let columns = probability_columns(distributions)?;
    check_indices(subset, distributions.len())?;
    FiniteDistribution::from_derived(
        columns
            .iter()
            .map(|col| subset.iter().map(|&i| col[i]).sum::<f64>() / subset.len() as f64)
            .collect(),
    )
}

/// Upper bound `(1 - Δ_a(S)/s)^R` on the abstention probability, valid when
/// safe members form a strict majority.
pub fn abstention_bound(
    distributions: &[FiniteDistribution],
    s: usize,
    rounds: u64,
    safe_set: &[usize],
) -> Result<f64> {
    let k = distributions.len();
    check_s(s, k)?;
    if 2 * s <= k {
        return Err(Error::NoSafeMajority { s, k });
    }
    check_indices(safe_set, k)?;
    if safe_set.len() != s {
        return Err(Error::InvalidSubset(format!(
            "safe set has {} members, s = {s}",
            safe_set.len()
        )));
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("abstention bound needs R >= 1".into()));
    }
    let (delta_a, _) = maximal_overlap(distributions, safe_set, k - s)?;
    Ok(abstain_after(delta_a / s as f64, rounds))
}

/// The tightest abstention bound over all size-`s` candidate safe sets.
pub fn best_abstention_bound(
    distributions: &[FiniteDistribution],
    s: usize,
    rounds: u64,
) -> Result<(f64, Vec<usize>)> {
    let k = distributions.len();
    check_subset_k(k)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for set in subsets(k, s) {
        let bound = abstention_bound(distributions, s, rounds, &set)?;
        if best.as_ref().is_none_or(|(b, _)| bound < *b) {
            best = Some((bound, set));
        }
    }
    best.ok_or(Error::NoSafeMajority { s, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{exact_output_law, SamplerConfig};

    fn d(mass: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(mass.to_vec()).unwrap()
    }

    #[test]
    fn risk_examples() {
        let law = exact_output_law(
            &[d(&[0.8, 0.2]), d(&[0.2, 0.8])],
            1,
            &SamplerConfig::finite(2),
        )
        .unwrap();
        assert_eq!(risk(&law, &UnsafeSet::empty()), 0.0);
        let u = UnsafeSet::new([1], 2).unwrap();
        assert!((risk(&law, &u) - 0.32).abs() < 1e-12);
        assert_eq!(risk(&OutputLaw::always_abstain(2), &u), 0.0);
        assert!(UnsafeSet::new([2], 2).is_err());
    }

    #[test]
    fn subset_sums_match_direct() {
        let a = [0.1, 0.2, 0.3, 0.4, 0.0];
        let table = SubsetSums::new(&[&a]);
        for mask in 0..32u64 {
            let direct: f64 = (0..5).filter(|&y| mask >> y & 1 == 1).map(|y| a[y]).sum();
            assert!((table.sum(0, mask) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn adversary_own_distribution_is_flagged() {
        // Two safe members put zero mass on outcome 2; the adversary puts all
        // its mass there.
        let ds = [
            d(&[0.5, 0.5, 0.0]),
            d(&[0.4, 0.6, 0.0]),
            d(&[0.0, 0.0, 1.0]),
        ];
        let law = OutputLaw::generating(ds[2].clone());
        let cert = verify_consensus_robustness(&law, &ds, 2, 5.0, None).unwrap();
        match cert {
            RobustnessCertificate::Violation { set, risk, allowed } => {
                assert!(set.contains(2));
                assert!(risk > allowed);
            }
            other => panic!("expected violation, got {other:?}"),
        }
        let sampler = exact_output_law(&ds, 2, &SamplerConfig::finite(5)).unwrap();
        assert!(verify_consensus_robustness(&sampler, &ds, 2, 5.0, None)
            .unwrap()
            .is_pass());
    }

    #[test]
    fn worst_case_examples() {
        let ds = [d(&[0.8, 0.2]), d(&[0.2, 0.8])];
        let jinx = OutputLaw::generating(d(&[0.5, 0.5]));
        // Z = 0.4, so R_jinx = 2.5.
        let r = worst_case_robustness(&jinx, &ds, 1).unwrap();
        assert!((r.value() - 2.5).abs() < 1e-12);

        let ds = [d(&[0.5, 0.5, 0.0]), d(&[0.5, 0.0, 0.5])];
        let on_zero = OutputLaw::generating(d(&[0.0, 0.5, 0.5]));
        assert_eq!(
            worst_case_robustness(&on_zero, &ds, 1).unwrap(),
            Robustness::Infinite
        );
        assert_eq!(
            worst_case_robustness(&OutputLaw::always_abstain(3), &ds, 1).unwrap(),
            Robustness::Finite(0.0)
        );
    }

    #[test]
    fn abstention_bound_examples() {
        let ds = [d(&[0.8, 0.2]), d(&[0.2, 0.8]), d(&[0.5, 0.5])];
        assert!(matches!(
            abstention_bound(&ds, 1, 3, &[0]),
            Err(Error::NoSafeMajority { s: 1, k: 3 })
        ));
        // Δ_1({1,2}) = 0.7 -> (1 - 0.35)^5
        let b = abstention_bound(&ds, 2, 5, &[1, 2]).unwrap();
        assert!((b - 0.65f64.powi(5)).abs() < 1e-12);
        let exact = exact_output_law(&ds, 2, &SamplerConfig::finite(5)).unwrap();
        assert!(exact.abstain_mass() <= b);
        assert!(abstention_bound(&ds, 2, 0, &[1, 2]).is_err());
        assert!(abstention_bound(&ds, 2, 1, &[1]).is_err());

        let p = d(&[0.3, 0.7]);
        let same = [p.clone(), p.clone(), p];
        for r in 1..5 {
            let b = abstention_bound(&same, 2, r, &[0, 1]).unwrap();
            assert!((b - 0.5f64.powi(r as i32)).abs() < 1e-12);
        }
        let (best, set) = best_abstention_bound(&ds, 2, 5).unwrap();
        assert!((best - 0.65f64.powi(5)).abs() < 1e-12);
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn robustness_serde() {
        let v = serde_json::to_string(&[Robustness::Finite(2.5), Robustness::Infinite]).unwrap();
        assert_eq!(v, "[2.5,\"inf\"]");
        let back: Vec<Robustness> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![Robustness::Finite(2.5), Robustness::Infinite]);
    }
}
