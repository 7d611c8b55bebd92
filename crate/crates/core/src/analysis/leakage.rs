//! Steganographic decoding probability and exact information-leakage
//! measures (mutual information, maximal leakage) for families of laws
//! indexed by a hidden message.
//!
//! All quantities are in bits. Abstention is treated as an ordinary symbol
//! `⊥` when computing leakage, and as decoding to no message when computing
//! decode probabilities.

use serde::{Deserialize, Serialize};

use super::robustness::{risk, risky_ratio, Robustness, UnsafeSet, BOUND_TOLERANCE};
use super::subsets::check_indices;
use crate::consensus::{probability_columns, OutputLaw};
use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, INPUT_TOLERANCE};

/// A total decoding map `f: Y -> message id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decoder(Vec<usize>);

impl Decoder {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self(map))
    }

    /// `f(y) = y mod 2`.
    pub fn parity(space_size: usize) -> Self {
        Self((0..space_size).map(|y| y % 2).collect())
    }

    pub fn space_size(&self) -> usize {
        self.0.len()
    }

    pub fn decode(&self, y: usize) -> usize {
        self.0[y]
    }

    /// `f^{-1}(m)`.
    pub fn preimage(&self, message: usize) -> UnsafeSet {
        UnsafeSet::new(
            (0..self.0.len()).filter(|&y| self.0[y] == message),
            self.0.len(),
        )
        .expect("indices are in range")
    }

    /// Distinct messages in the decoder's range, ascending.
    pub fn messages(&self) -> Vec<usize> {
        let mut ms = self.0.clone();
        ms.sort_unstable();
        ms.dedup();
        ms
    }
}

/// `Pr_{y~q}[f(y) = m]`.
pub fn steg_decode_probability(law: &OutputLaw, decoder: &Decoder, message: usize) -> f64 {
    risk(law, &decoder.preimage(message))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StegCertificate {
    pub message: usize,
    pub decode_probability: f64,
    /// Mean decode probability over the safe set.
    pub epsilon_mean: f64,
    /// Largest decode probability over the safe set.
    pub epsilon_max: f64,
    pub rounds: f64,
    /// `R · epsilon_mean`; never larger than `R · epsilon_max`.
    pub bound: f64,
    pub pass: bool,
}

/// Compares the decode probability of `law` with `R` times the safe members'
/// chance of producing the message by accident.
pub fn steg_certificate(
    law: &OutputLaw,
    distributions: &[FiniteDistribution],
    safe_set: &[usize],
    decoder: &Decoder,
    message: usize,
    rounds: f64,
) -> Result<StegCertificate> {
    probability_columns(distributions)?;
    check_indices(safe_set, distributions.len())?;
    if decoder.space_size() != law.space_size() {
        return Err(Error::SpaceMismatch {
            expected: format!("|Y| = {}", law.space_size()),
            found: format!("decoder over {} outcomes", decoder.space_size()),
        });
    }
    let preimage = decoder.preimage(message);
    let safe: Vec<f64> = safe_set
        .iter()
        .map(|&i| distributions[i].prob_of(preimage.members().iter().copied()))
        .collect();
    let epsilon_mean = safe.iter().sum::<f64>() / safe.len() as f64;
    let epsilon_max = safe.iter().copied().fold(0.0, f64::max);
    let decode_probability = risk(law, &preimage);
    let bound = rounds * epsilon_mean;
    Ok(StegCertificate {
        message,
        decode_probability,
        epsilon_mean,
        epsilon_max,
        rounds,
        bound,
        pass: decode_probability <= bound + BOUND_TOLERANCE,
    })
}

/// A message `M` with prior `prior` and, for each message, the law `q_m` of
/// the response `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageFamily {
    prior: FiniteDistribution,
    laws: Vec<OutputLaw>,
}

impl MessageFamily {
    pub fn new(prior: FiniteDistribution, laws: Vec<OutputLaw>) -> Result<Self> {
        if laws.len() != prior.len() {
            return Err(Error::InvalidFamily(format!(
                "{} laws for {} messages",
                laws.len(),
                prior.len()
            )));
        }
        let n = laws[0].space_size();
        if laws.iter().any(|l| l.space_size() != n) {
            return Err(Error::InvalidFamily("laws over different spaces".into()));
        }
        Ok(Self { prior, laws })
    }

    pub fn uniform(laws: Vec<OutputLaw>) -> Result<Self> {
        let prior = FiniteDistribution::uniform(laws.len())?;
        Self::new(prior, laws)
    }

    pub fn prior(&self) -> &FiniteDistribution {
        &self.prior
    }

    pub fn laws(&self) -> &[OutputLaw] {
        &self.laws
    }
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// `I(Q; M) = H(Q) - H(Q | M)` with `⊥` as an explicit symbol.
pub fn mutual_information(family: &MessageFamily) -> f64 {
    let extended: Vec<Vec<f64>> = family.laws.iter().map(|l| l.extended_mass()).collect();
    let width = extended[0].len();
    let marginal: Vec<f64> = (0..width)
        .map(|y| {
            extended
                .iter()
                .zip(family.prior.mass())
                .map(|(q, w)| w * q[y])
                .sum()
        })
        .collect();
    let h_q = -marginal.iter().map(|&p| xlog2x(p)).sum::<f64>();
    let h_q_given_m: f64 = extended
        .iter()
        .zip(family.prior.mass())
        .map(|(q, w)| -w * q.iter().map(|&p| xlog2x(p)).sum::<f64>())
        .sum();
    (h_q - h_q_given_m).max(0.0)
}

/// `log2 Σ_y max_m Pr[Q = y | M = m]`, maximizing over messages with positive
/// prior and summing over `Y ∪ {⊥}`.
pub fn maximal_leakage(family: &MessageFamily) -> f64 {
    let extended: Vec<Vec<f64>> = family
        .laws
        .iter()
        .zip(family.prior.mass())
        .filter(|(_, &w)| w > 0.0)
        .map(|(l, _)| l.extended_mass())
        .collect();
    let width = extended[0].len();
    let total: f64 = (0..width)
        .map(|y| extended.iter().map(|q| q[y]).fold(0.0, f64::max))
        .sum();
    total.log2().max(0.0)
}

/// Smallest `R` such that every law with positive prior is `R`-risky
/// relative to `p`.
pub fn certified_risk_level(family: &MessageFamily, p: &FiniteDistribution) -> Robustness {
    family
        .laws
        .iter()
        .zip(family.prior.mass())
        .filter(|(_, &w)| w > 0.0)
        .map(|(l, _)| risky_ratio(l, p))
        .fold(Robustness::Finite(0.0), |acc, r| match (acc, r) {
            (Robustness::Finite(a), Robustness::Finite(b)) => Robustness::Finite(a.max(b)),
            _ => Robustness::Infinite,
        })
}

fn bound_bits(level: Robustness) -> f64 {
    (level.value() + 1.0).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub mutual_information_bits: f64,
    pub maximal_leakage_bits: f64,
    /// Leakage of the safe response. With a fixed prompt the safe response
    /// is independent of the message, so this is zero.
    pub safe_baseline_bits: f64,
    /// `R` claimed by the caller.
    pub claimed_r: f64,
    /// Least `R` for which every `q_m` is `R`-risky relative to `p`.
    pub certified_r: Robustness,
    /// `log2(R + 1)` at the tighter of the two levels for which the
    /// riskiness precondition holds.
    pub bound_bits: f64,
    /// Whether every `q_m` really is `claimed_r`-risky.
    pub precondition_holds: bool,
    pub mutual_information_within_bound: bool,
    pub maximal_leakage_within_bound: bool,
}

impl LeakageReport {
    pub fn pass(&self) -> bool {
        self.mutual_information_within_bound && self.maximal_leakage_within_bound
    }
}

/// Leakage audit for a family of laws that should each be `claimed_r`-risky
/// relative to the safe distribution `p`.
pub fn leakage_audit(
    family: &MessageFamily,
    p: &FiniteDistribution,
    claimed_r: f64,
) -> Result<LeakageReport> {
    if p.len() != family.laws[0].space_size() {
        return Err(Error::SpaceMismatch {
            expected: format!("|Y| = {}", family.laws[0].space_size()),
            found: format!("|Y| = {}", p.len()),
        });
    }
    let certified = certified_risk_level(family, p);
    let precondition_holds = certified.at_most(&Robustness::Finite(claimed_r), INPUT_TOLERANCE);
    let level = if precondition_holds {
        match certified {
            Robustness::Finite(c) => Robustness::Finite(c.min(claimed_r)),
            Robustness::Infinite => Robustness::Finite(claimed_r),
        }
    } else {
        certified
    };
    let bound = bound_bits(level);
    let mi = mutual_information(family);
    let ml = maximal_leakage(family);
    Ok(LeakageReport {
        mutual_information_bits: mi,
        maximal_leakage_bits: ml,
        safe_baseline_bits: 0.0,
        claimed_r,
        certified_r: certified,
        bound_bits: bound,
        precondition_holds,
        mutual_information_within_bound: mi <= bound + BOUND_TOLERANCE,
        maximal_leakage_within_bound: ml <= bound + BOUND_TOLERANCE,
    })
}

/// Prompt `X` and message `M` with joint prior `joint[x][m]`, a safe law
/// `p_x` per prompt and a response law `q_{x,m}` per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptedFamily {
    joint: Vec<Vec<f64>>,
    safe: Vec<FiniteDistribution>,
    laws: Vec<Vec<OutputLaw>>,
}

impl PromptedFamily {
    pub fn new(
        joint: Vec<Vec<f64>>,
        safe: Vec<FiniteDistribution>,
        laws: Vec<Vec<OutputLaw>>,
    ) -> Result<Self> {
        let prompts = joint.len();
        if prompts == 0 || safe.len() != prompts || laws.len() != prompts {
            return Err(Error::InvalidFamily(
                "joint prior, safe laws and response laws disagree on the prompt count".into(),
            ));
        }
        let messages = joint[0].len();
        if messages == 0
            || joint.iter().any(|row| row.len() != messages)
            || laws.iter().any(|row| row.len() != messages)
        {
            return Err(Error::InvalidFamily("ragged message dimension".into()));
        }
        let flat: Vec<f64> = joint.iter().flatten().copied().collect();
        FiniteDistribution::new(flat)?;
        let n = safe[0].len();
        if safe.iter().any(|p| p.len() != n) || laws.iter().flatten().any(|q| q.space_size() != n) {
            return Err(Error::InvalidFamily("laws over different spaces".into()));
        }
        Ok(Self { joint, safe, laws })
    }

    pub fn prompts(&self) -> usize {
        self.joint.len()
    }

    pub fn messages(&self) -> usize {
        self.joint[0].len()
    }

    fn message_marginal(&self, m: usize) -> f64 {
        self.joint.iter().map(|row| row[m]).sum()
    }

    /// `Pr[Q = y | M = m]` over `Y ∪ {⊥}`.
    pub fn response_given_message(&self, m: usize) -> Vec<f64> {
        let pm = self.message_marginal(m);
        let width = self.safe[0].len() + 1;
        let mut out = vec![0.0; width];
        for x in 0..self.prompts() {
            let w = self.joint[x][m] / pm;
            for (slot, q) in out.iter_mut().zip(self.laws[x][m].extended_mass()) {
                *slot += w * q;
            }
        }
        out
    }

    /// `Pr[P = y | M = m]` over `Y ∪ {⊥}` (the safe law never abstains).
    pub fn safe_given_message(&self, m: usize) -> Vec<f64> {
        let pm = self.message_marginal(m);
        let width = self.safe[0].len() + 1;
        let mut out = vec![0.0; width];
        for x in 0..self.prompts() {
            let w = self.joint[x][m] / pm;
            for (slot, p) in out.iter_mut().zip(self.safe[x].mass()) {
                *slot += w * p;
            }
        }
        out
    }
}

fn leakage_of(rows: &[Vec<f64>]) -> f64 {
    let width = rows[0].len();
    let total: f64 = (0..width)
        .map(|y| rows.iter().map(|r| r[y]).fold(0.0, f64::max))
        .sum();
    total.log2().max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptedLeakage {
    /// `L(M -> Q)`.
    pub response_bits: f64,
    /// `L(M -> P)`.
    pub safe_bits: f64,
    pub certified_r: Robustness,
    pub claimed_r: f64,
    pub precondition_holds: bool,
    /// `log2(R + 1)` at the tighter valid level.
    pub bound_bits: f64,
    pub pass: bool,
}

/// Checks `L(M -> Q) - L(M -> P) <= log2(R + 1)` for a prompted family
/// whose laws should each be `claimed_r`-risky relative to their prompt's
/// safe law.
pub fn prompted_leakage_audit(family: &PromptedFamily, claimed_r: f64) -> PromptedLeakage {
    let active: Vec<usize> = (0..family.messages())
        .filter(|&m| family.message_marginal(m) > 0.0)
        .collect();
    let q_rows: Vec<Vec<f64>> = active
        .iter()
        .map(|&m| family.response_given_message(m))
        .collect();
    let p_rows: Vec<Vec<f64>> = active
        .iter()
        .map(|&m| family.safe_given_message(m))
        .collect();
    let response_bits = leakage_of(&q_rows);
    let safe_bits = leakage_of(&p_rows);

    let mut certified = Robustness::Finite(0.0);
    for x in 0..family.prompts() {
        for m in 0..family.messages() {
            if family.joint[x][m] > 0.0 {
                let r = risky_ratio(&family.laws[x][m], &family.safe[x]);
                certified = match (certified, r) {
                    (Robustness::Finite(a), Robustness::Finite(b)) => Robustness::Finite(a.max(b)),
                    _ => Robustness::Infinite,
                };
            }
        }
    }
    let precondition_holds = certified.at_most(&Robustness::Finite(claimed_r), INPUT_TOLERANCE);
    let level = if precondition_holds {
        certified.value().min(claimed_r)
    } else {
        certified.value()
    };
    let bound = (level + 1.0).log2();
    PromptedLeakage {
        response_bits,
        safe_bits,
        certified_r: certified,
        claimed_r,
        precondition_holds,
        bound_bits: bound,
        pass: response_bits - safe_bits <= bound + BOUND_TOLERANCE,
    }
}

/// Per-prompt steganography check: for every prompt `x` and message `m`,
/// `q_x(f^{-1}(m)) <= R · p_x(f^{-1}(m))`. Returns the first failing
/// `(prompt, message)` pair, if any.
pub fn prompted_steg_check(
    laws: &[OutputLaw],
    safe: &[FiniteDistribution],
    decoder: &Decoder,
    rounds: f64,
) -> Result<Option<(usize, usize)>> {
    if laws.len() != safe.len() {
        return Err(Error::InvalidFamily(
            "one law and one safe law per prompt".into(),
        ));
    }
    for (x, (q, p)) in laws.iter().zip(safe).enumerate() {
        for m in decoder.messages() {
            let pre = decoder.preimage(m);
            let lhs = risk(q, &pre);
            let rhs = rounds * p.prob_of(pre.members().iter().copied());
            if lhs > rhs + BOUND_TOLERANCE {
                return Ok(Some((x, m)));
            }
        }
    }
    Ok(None)
}
