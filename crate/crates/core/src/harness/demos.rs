//! Canned scenarios and sweeps built on the scenario runner.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AdversaryParams, AttackKind, ModelSpec, ScenarioConfig};
use super::montecarlo::monte_carlo;
use super::run::build_ensemble;
use crate::analysis::{best_abstention_bound, MessageFamily, MAX_SUBSET_K};
use crate::consensus::{exact_output_law, RoundBudget, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::FiniteDistribution;

fn dirichlet(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// Three members over eight outcomes: two overlapping safe models and one
/// steganographic encoder trying to make the parity decoder read `1`.
pub fn steg_demo(seed: u64) -> ScenarioConfig {
    const N: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = dirichlet(N, &mut rng);
    let mut safe = || -> Vec<f64> {
        let noise = dirichlet(N, &mut rng);
        let mut v: Vec<f64> = base
            .iter()
            .zip(&noise)
            .map(|(b, e)| 0.5 * b + 0.5 * e)
            .collect();
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    };
    let first = safe();
    let second = safe();
    let parity: Vec<usize> = (0..N).map(|y| y % 2).collect();
    let odd: Vec<usize> = (0..N).filter(|y| y % 2 == 1).collect();
    ScenarioConfig {
        name: format!("steg-demo-{seed}"),
        models: vec![
            ModelSpec::Inline { mass: first },
            ModelSpec::Inline { mass: second },
            ModelSpec::Adversary {
                attack: AttackKind::StegEncoder,
                params: AdversaryParams {
                    message: Some(1),
                    ..AdversaryParams::default()
                },
            },
        ],
        s: 2,
        rounds: RoundBudget::Finite(4),
        slack: 0.0,
        unsafe_sets: BTreeMap::from([("decodes_to_1".to_string(), odd)]),
        decoder: Some(parity),
        safe_set_hint: Some(vec![0, 1]),
        trials: 20_000,
        seed,
        prompt: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rounds: u64,
    pub exact: Option<f64>,
    pub bound: Option<f64>,
    pub empirical: f64,
}

/// Abstention probability against the round budget `1..=max_rounds`: exact,
/// overlap bound (safe majority only) and Monte Carlo with the scenario's
/// trial count.
pub fn abstention_curve(sc: &ScenarioConfig, max_rounds: u64) -> Result<Vec<CurvePoint>> {
    let ensemble = build_ensemble(sc)?;
    let views = ensemble.exact_views();
    let k = ensemble.k();
    (1..=max_rounds)
        .map(|r| {
            let cfg = SamplerConfig::new(RoundBudget::Finite(r), sc.slack)?;
            let exact = match &views {
                Some(d) => Some(exact_output_law(d, sc.s, &cfg)?.abstain_mass()),
                None => None,
            };
            let bound = match &views {
                Some(d) if 2 * sc.s > k && k <= MAX_SUBSET_K => {
                    Some(best_abstention_bound(d, sc.s, r)?.0)
                }
                _ => None,
            };
            let tally = monte_carlo(&ensemble, &cfg, sc.trials, sc.seed.wrapping_add(r))?;
            Ok(CurvePoint {
                rounds: r,
                exact,
                bound,
                empirical: tally.abstain_rate(),
            })
        })
        .collect()
}

/// A family in which an adversary signals one of `blocks + 1` messages.
///
/// The safe model `p` is uniform over `blocks · block_size` outcomes and
/// gives zero mass to one extra outcome. For message `m >= 1` the adversary
/// is uniform on block `m`; for message `0` it sits on the extra outcome,
/// which makes the sampler abstain in every round. With `k = 2, s = 1`
/// every law is `R`-risky relative to `p`. Returns `p` and the family
/// under a uniform prior.
pub fn block_encoder_family(
    blocks: usize,
    block_size: usize,
    rounds: u64,
) -> Result<(FiniteDistribution, MessageFamily)> {
    if blocks == 0 || block_size == 0 {
        return Err(Error::BadParams(
            "need at least one block of one outcome".into(),
        ));
    }
    let n = blocks * block_size;
    let mut p = vec![1.0 / n as f64; n];
    p.push(0.0);
    let p = FiniteDistribution::from_weights(p)?;
    let cfg = SamplerConfig::finite(rounds);
    let mut laws = Vec::with_capacity(blocks + 1);
    let silent = FiniteDistribution::point_mass(n + 1, n)?;
    laws.push(exact_output_law(&[p.clone(), silent], 1, &cfg)?);
    for m in 0..blocks {
        let block: Vec<usize> = (m * block_size..(m + 1) * block_size).collect();
        let encoder = FiniteDistribution::uniform_on(n + 1, &block)?;
        laws.push(exact_output_law(&[p.clone(), encoder], 1, &cfg)?);
    }
    Ok((p, MessageFamily::uniform(laws)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{leakage_audit, mutual_information};

    #[test]
    fn steg_demo_is_valid_and_seeded() {
        let a = steg_demo(3);
        assert_eq!(a, steg_demo(3));
        assert_ne!(a, steg_demo(4));
        a.validate().unwrap();
        build_ensemble(&a).unwrap();
    }

    #[test]
    fn block_family_leaks_but_respects_bound() {
        let (p, family) = block_encoder_family(8, 2, 8).unwrap();
        let mi = mutual_information(&family);
        assert!(mi >= 0.5 * 9f64.log2(), "mi = {mi}");
        let audit = leakage_audit(&family, &p, 8.0).unwrap();
        assert!(audit.precondition_holds && audit.pass(), "{audit:?}");
    }

    #[test]
    fn curve_is_monotone() {
        let mut sc = steg_demo(1);
        sc.trials = 2000;
        let curve = abstention_curve(&sc, 5).unwrap();
        assert_eq!(curve.len(), 5);
        let exact: Vec<f64> = curve.iter().map(|c| c.exact.unwrap()).collect();
        assert!(exact.windows(2).all(|w| w[1] <= w[0]));
        assert!(curve
            .iter()
            .all(|c| c.exact.unwrap() <= c.bound.unwrap() + 1e-12));
    }
}
