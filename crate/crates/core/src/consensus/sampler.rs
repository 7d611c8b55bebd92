use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::law::{acceptance_weights, lower_mean};
use crate::error::{Error, Result};
use crate::model::{sample_index, Ensemble, Outcome, PromptedOracle};

/// Slack on the acceptance ratio at zero boost before it counts as a real
/// violation rather than rounding.
const RATIO_TOLERANCE: f64 = 1e-9;

/// Number of proposal rounds before abstaining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundBudget {
    Finite(u64),
    Unbounded,
}

impl fmt::Display for RoundBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundBudget::Finite(r) => write!(f, "{r}"),
            RoundBudget::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Serialize for RoundBudget {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RoundBudget::Finite(r) => serializer.serialize_u64(*r),
            RoundBudget::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for RoundBudget {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct BudgetVisitor;

        impl Visitor<'_> for BudgetVisitor {
            type Value = RoundBudget;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"unbounded\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<RoundBudget, E> {
                Ok(RoundBudget::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<RoundBudget, E> {
                u64::try_from(v)
                    .map(RoundBudget::Finite)
                    .map_err(|_| E::custom("round budget must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<RoundBudget, E> {
                if v.eq_ignore_ascii_case("unbounded") {
                    Ok(RoundBudget::Unbounded)
                } else {
                    v.parse()
                        .map(RoundBudget::Finite)
                        .map_err(|_| E::custom(format!("invalid round budget {v:?}")))
                }
            }
        }

        deserializer.deserialize_any(BudgetVisitor)
    }
}

impl std::str::FromStr for RoundBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("unbounded") {
            return Ok(RoundBudget::Unbounded);
        }
        s.parse()
            .map(RoundBudget::Finite)
            .map_err(|_| Error::InvalidConfig(format!("invalid round budget {s:?}")))
    }
}

/// Round budget `R` and slack `L >= 0` (acceptance boosted by `2^L`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    rounds: RoundBudget,
    #[serde(default)]
    slack: f64,
}

impl SamplerConfig {
    pub fn new(rounds: RoundBudget, slack: f64) -> Result<Self> {
        if !slack.is_finite() || slack < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "slack must be finite and non-negative, got {slack}"
            )));
        }
        Ok(Self { rounds, slack })
    }

    pub fn finite(rounds: u64) -> Self {
        Self {
            rounds: RoundBudget::Finite(rounds),
            slack: 0.0,
        }
    }

    pub fn unbounded() -> Self {
        Self {
            rounds: RoundBudget::Unbounded,
            slack: 0.0,
        }
    }

    pub fn with_slack(self, slack: f64) -> Result<Self> {
        Self::new(self.rounds, slack)
    }

    pub fn rounds(&self) -> RoundBudget {
        self.rounds
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SampleResult {
    Generated { outcome: Outcome, rounds_used: u64 },
    Abstain,
}

impl SampleResult {
    pub fn outcome(&self) -> Option<&Outcome> {
        match self {
            SampleResult::Generated { outcome, .. } => Some(outcome),
            SampleResult::Abstain => None,
        }
    }

    pub fn is_abstain(&self) -> bool {
        matches!(self, SampleResult::Abstain)
    }
}

/// Acceptance probability from member probabilities in linear space:
/// `min{1, 2^L · mean(s smallest) / mean(all)}`.
pub fn acceptance_ratio(probs: &[f64], s: usize, slack: f64) -> Result<f64> {
    let mean = probs.iter().sum::<f64>() / probs.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    clamp_ratio(lower_mean(probs, s) / mean, slack)
}

/// Same as [`acceptance_ratio`], from base-2 log-probabilities. Only one
/// exponentiation per member is needed after shifting by the maximum, so
/// sequences whose probabilities underflow `f64` are still handled.
pub fn acceptance_from_log_probs(log_probs: &[f64], s: usize, slack: f64) -> Result<f64> {
    let top = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY || top.is_nan() {
        return Err(Error::ZeroDenominator);
    }
    let scaled: Vec<f64> = log_probs.iter().map(|lp| (lp - top).exp2()).collect();
    acceptance_ratio(&scaled, s, slack)
}

fn clamp_ratio(ratio: f64, slack: f64) -> Result<f64> {
    if slack == 0.0 && ratio > 1.0 + RATIO_TOLERANCE {
        return Err(Error::AcceptanceOverflow(ratio));
    }
    Ok((ratio * slack.exp2()).clamp(0.0, 1.0))
}

/// Queries every member once for `log p_i(y)` and returns the acceptance
/// probability of `y`.
pub fn acceptance_probability(ensemble: &Ensemble, y: &Outcome, slack: f64) -> Result<f64> {
    let log_probs = ensemble
        .members()
        .iter()
        .map(|m| m.log_prob(y))
        .collect::<Result<Vec<_>>>()?;
    acceptance_from_log_probs(&log_probs, ensemble.s(), slack)
}

/// Consensus sampling: up to `R` rounds of proposing `y` from the uniform
/// mixture of the members and accepting it with
/// [`acceptance_probability`]; abstains if every round rejects.
///
/// Each round costs one draw plus `k` probability queries. The unbounded
/// budget draws directly from the per-round acceptance law (it needs exact
/// member distributions to do so) and reports a geometric round count.
pub fn consensus_sample(
    ensemble: &Ensemble,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
) -> Result<SampleResult> {
    let rounds = match cfg.rounds() {
        RoundBudget::Finite(r) => r,
        RoundBudget::Unbounded => return sample_unbounded(ensemble, cfg, rng),
    };
    let members = ensemble.members();
    for round in 1..=rounds {
        let proposer = rng.random_range(0..members.len());
        let y = members[proposer].draw(rng)?;
        let alpha = acceptance_probability(ensemble, &y, cfg.slack())?;
        let u: f64 = rng.random();
        if u < alpha {
            return Ok(SampleResult::Generated {
                outcome: y,
                rounds_used: round,
            });
        }
    }
    Ok(SampleResult::Abstain)
}

fn sample_unbounded(
    ensemble: &Ensemble,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
) -> Result<SampleResult> {
    let views = ensemble
        .exact_views()
        .ok_or(Error::UnboundedWithoutExactView)?;
    let weights = acceptance_weights(&views, ensemble.s(), cfg.slack())?;
    let accept: f64 = weights.iter().sum();
    if accept.is_nan() || accept <= 0.0 {
        return Err(Error::AlwaysAbstains);
    }
    let index = sample_index(&weights, rng.random());
    let rounds_used = if accept >= 1.0 {
        1
    } else {
        // Number of rounds until the first acceptance is geometric.
        let u: f64 = 1.0 - rng.random::<f64>();
        1 + (u.ln() / (1.0 - accept).ln()).floor() as u64
    };
    Ok(SampleResult::Generated {
        outcome: ensemble.shape().outcome_at(index),
        rounds_used,
    })
}

/// Consensus sampling with a prompt: every model is first conditioned on
/// `prompt`, then the unprompted sampler runs on the resolved ensemble.
pub fn consensus_sample_prompted(
    models: &[Arc<dyn PromptedOracle>],
    prompt: usize,
    s: usize,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
) -> Result<SampleResult> {
    let members = models
        .iter()
        .map(|m| m.resolve(prompt))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = Ensemble::new(members, s)?;
    consensus_sample(&ensemble, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FiniteDistribution, PromptTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(mass: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(mass.to_vec()).unwrap()
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_ratio(&[0.3, 0.3, 0.3], 2, 0.0).unwrap(), 1.0);
        assert_eq!(acceptance_ratio(&[0.4, 0.0], 1, 0.0).unwrap(), 0.0);
        // (0.1 + 0.2)/2 / (1.0/3) = 0.45
        let a = acceptance_ratio(&[0.1, 0.2, 0.7], 2, 0.0).unwrap();
        assert!((a - 0.45).abs() < 1e-12);
        let boosted = acceptance_ratio(&[0.1, 0.2, 0.7], 2, 1.0).unwrap();
        assert!((boosted - 0.9).abs() < 1e-12);
        assert_eq!(acceptance_ratio(&[0.1, 0.2, 0.7], 2, 2.0).unwrap(), 1.0);
        assert!(matches!(
            acceptance_ratio(&[0.0, 0.0], 1, 0.0),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn log_domain_matches_linear() {
        let probs = [0.1, 0.2, 0.7];
        let lps: Vec<f64> = probs.iter().map(|p: &f64| p.log2()).collect();
        let a = acceptance_from_log_probs(&lps, 2, 0.0).unwrap();
        assert!((a - 0.45).abs() < 1e-12);
        // Probabilities far below f64 range.
        let tiny = [-5000.0, -5001.0, -5000.5];
        let a = acceptance_from_log_probs(&tiny, 1, 0.0).unwrap();
        let want = 0.5 / ((1.0 + 0.5 + 0.5f64.sqrt()) / 3.0);
        assert!((a - want).abs() < 1e-12);
        assert!(matches!(
            acceptance_from_log_probs(&[f64::NEG_INFINITY; 3], 1, 0.0),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn acceptance_via_ensemble() {
        let e = Ensemble::from_distributions(&[d(&[0.1, 0.9]), d(&[0.2, 0.8]), d(&[0.7, 0.3])], 2)
            .unwrap();
        let a = acceptance_probability(&e, &Outcome::Index(0), 0.0).unwrap();
        assert!((a - 0.45).abs() < 1e-12);
    }

    #[test]
    fn identical_members_always_generate() {
        let p = d(&[0.2, 0.3, 0.5]);
        let e = Ensemble::from_distributions(&[p.clone(), p.clone(), p], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = consensus_sample(&e, &SamplerConfig::finite(1), &mut rng).unwrap();
            assert!(matches!(r, SampleResult::Generated { rounds_used: 1, .. }));
        }
    }

    #[test]
    fn zero_rounds_abstain() {
        let p = d(&[0.5, 0.5]);
        let e = Ensemble::from_distributions(&[p.clone(), p], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = consensus_sample(&e, &SamplerConfig::finite(0), &mut rng).unwrap();
        assert_eq!(r, SampleResult::Abstain);
    }

    #[test]
    fn disjoint_supports_always_abstain() {
        let e = Ensemble::from_distributions(&[d(&[1.0, 0.0]), d(&[0.0, 1.0])], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for r in [1, 5, 50] {
            for _ in 0..200 {
                let out = consensus_sample(&e, &SamplerConfig::finite(r), &mut rng).unwrap();
                assert!(out.is_abstain());
            }
        }
        assert!(matches!(
            consensus_sample(&e, &SamplerConfig::unbounded(), &mut rng),
            Err(Error::AlwaysAbstains)
        ));
    }

    #[test]
    fn unbounded_needs_exact_views() {
        struct Opaque;
        impl crate::model::GenerativeOracle for Opaque {
            fn shape(&self) -> crate::model::OutcomeShape {
                crate::model::OutcomeShape::Flat { size: 2 }
            }
            fn draw(&self, _: &mut dyn RngCore) -> Result<Outcome> {
                Ok(Outcome::Index(0))
            }
            fn log_prob(&self, y: &Outcome) -> Result<f64> {
                Ok(if *y == Outcome::Index(0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                })
            }
        }
        let e = Ensemble::new(vec![Arc::new(Opaque), Arc::new(Opaque)], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            consensus_sample(&e, &SamplerConfig::unbounded(), &mut rng),
            Err(Error::UnboundedWithoutExactView)
        ));
        // Finite budgets only need oracle access.
        assert!(consensus_sample(&e, &SamplerConfig::finite(1), &mut rng).is_ok());
    }

    #[test]
    fn prompted_sampling_resolves_the_prompt() {
        // Prompt 0: members agree on outcome 0. Prompt 1: agree on outcome 2.
        let a =
            PromptTable::from_distributions(&[d(&[1.0, 0.0, 0.0]), d(&[0.0, 0.0, 1.0])]).unwrap();
        let b =
            PromptTable::from_distributions(&[d(&[1.0, 0.0, 0.0]), d(&[0.0, 0.0, 1.0])]).unwrap();
        let models: Vec<Arc<dyn PromptedOracle>> = vec![Arc::new(a), Arc::new(b)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (prompt, want) in [(0, 0), (1, 2)] {
            let r =
                consensus_sample_prompted(&models, prompt, 2, &SamplerConfig::finite(1), &mut rng)
                    .unwrap();
            assert_eq!(r.outcome(), Some(&Outcome::Index(want)));
        }
        assert!(
            consensus_sample_prompted(&models, 2, 2, &SamplerConfig::finite(1), &mut rng).is_err()
        );
    }

    #[test]
    fn budget_serde() {
        let b: RoundBudget = serde_json::from_str("12").unwrap();
        assert_eq!(b, RoundBudget::Finite(12));
        let b: RoundBudget = serde_json::from_str("\"unbounded\"").unwrap();
        assert_eq!(b, RoundBudget::Unbounded);
        assert!(serde_json::from_str::<RoundBudget>("-1").is_err());
        assert_eq!(
            serde_json::to_string(&RoundBudget::Unbounded).unwrap(),
            "\"unbounded\""
        );
        assert!(SamplerConfig::new(RoundBudget::Finite(1), -1.0).is_err());
    }
}
