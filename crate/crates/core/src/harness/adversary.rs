//! Scripted adversarial members.

use std::sync::Arc;

use super::config::{AdversaryParams, AttackKind};
use crate::error::{Error, Result};
use crate::model::{ExactOracle, FiniteDistribution, GenerativeOracle};

fn uniform_on(space: usize, support: &[usize], what: &str) -> Result<FiniteDistribution> {
    if let Some(&bad) = support.iter().find(|&&y| y >= space) {
        return Err(Error::BadParams(format!(
            "{what}: outcome {bad} outside 0..{space}"
        )));
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if support.is_empty() {
        return Err(Error::BadParams(format!("{what}: empty support")));
    }
    FiniteDistribution::uniform_on(space, &support)
}

/// The distribution an attack places on a space of `space` outcomes.
/// `scenario_decoder` is the fallback decoder for `steg-encoder`.
pub fn adversary_distribution(
    attack: AttackKind,
    params: &AdversaryParams,
    space: usize,
    scenario_decoder: Option<&[usize]>,
) -> Result<FiniteDistribution> {
    if let Some(declared) = params.space {
        if declared != space {
            return Err(Error::BadParams(format!(
                "adversary declares {declared} outcomes, ensemble has {space}"
            )));
        }
    }
    match attack {
        AttackKind::UnsafeUniform => {
            let set = params
                .unsafe_set
                .as_deref()
                .ok_or_else(|| Error::BadParams("unsafe-uniform needs unsafe_set".into()))?;
            uniform_on(space, set, "unsafe-uniform")
        }
        AttackKind::StegEncoder => {
            let message = params
                .message
                .ok_or_else(|| Error::BadParams("steg-encoder needs message".into()))?;
            let decoder: Vec<usize> = match params.decoder.as_deref().or(scenario_decoder) {
                Some(d) => d.to_vec(),
                None => (0..space).map(|y| y % 2).collect(),
            };
            if decoder.len() != space {
                return Err(Error::BadParams(format!(
                    "decoder covers {} outcomes, space has {space}",
                    decoder.len()
                )));
            }
            let preimage: Vec<usize> = (0..space).filter(|&y| decoder[y] == message).collect();
            uniform_on(space, &preimage, "steg-encoder")
        }
        AttackKind::AbstentionForcer => {
            let safe = params
                .safe_support
                .as_deref()
                .ok_or_else(|| Error::BadParams("abstention-forcer needs safe_support".into()))?;
            if let Some(&bad) = safe.iter().find(|&&y| y >= space) {
                return Err(Error::BadParams(format!(
                    "abstention-forcer: outcome {bad} outside 0..{space}"
                )));
            }
            let off: Vec<usize> = (0..space).filter(|y| !safe.contains(y)).collect();
            uniform_on(space, &off, "abstention-forcer")
        }
    }
}

pub fn build_adversary(
    attack: AttackKind,
    params: &AdversaryParams,
    space: usize,
    scenario_decoder: Option<&[usize]>,
) -> Result<Arc<dyn GenerativeOracle>> {
    let dist = adversary_distribution(attack, params, space, scenario_decoder)?;
    Ok(Arc::new(ExactOracle::new(dist)))
}
