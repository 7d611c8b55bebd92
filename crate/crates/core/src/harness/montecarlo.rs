//! Seeded, parallel Monte Carlo over the consensus sampler.
//!
//! Trials are cut into fixed-size chunks and chunk `c` draws from the ChaCha
//! stream `c` of the scenario seed, so results do not depend on how many
//! worker threads run the chunks.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{consensus_sample, OutputLaw, SampleResult, SamplerConfig};
use crate::error::Result;
use crate::model::{CountingOracle, Ensemble, GenerativeOracle, ENUMERATION_LIMIT};

pub const CHUNK_TRIALS: u64 = 2048;

/// Random stream for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub abstentions: u64,
    /// Per-outcome counts when the space is enumerable.
    pub counts: Option<Vec<u64>>,
    pub rounds_used: u64,
    pub draws: u64,
    pub queries: u64,
    /// Largest number of oracle calls made by a single sampler invocation.
    pub max_calls_per_invocation: u64,
}

impl Tally {
    fn empty(counts: Option<usize>) -> Self {
        Self {
            trials: 0,
            abstentions: 0,
            counts: counts.map(|n| vec![0; n]),
            rounds_used: 0,
            draws: 0,
            queries: 0,
            max_calls_per_invocation: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.abstentions += other.abstentions;
        if let (Some(a), Some(b)) = (&mut self.counts, other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.rounds_used += other.rounds_used;
        self.draws += other.draws;
        self.queries += other.queries;
        self.max_calls_per_invocation = self
            .max_calls_per_invocation
            .max(other.max_calls_per_invocation);
        self
    }

    pub fn abstain_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.abstentions as f64 / self.trials as f64
        }
    }

    /// Empirical frequencies over `Y ∪ {⊥}` (⊥ last).
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        let counts = self.counts.as_ref()?;
        if self.trials == 0 {
            return None;
        }
        let n = self.trials as f64;
        let mut f: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        f.push(self.abstentions as f64 / n);
        Some(f)
    }

    pub fn empirical_law(&self) -> Option<OutputLaw> {
        OutputLaw::from_extended(&self.frequencies()?).ok()
    }
}

fn run_chunk(
    ensemble: &Ensemble,
    cfg: &SamplerConfig,
    trials: u64,
    seed: u64,
    chunk: u64,
    count_len: Option<usize>,
) -> Result<Tally> {
    let counters: Vec<Arc<CountingOracle>> = ensemble
        .members()
        .iter()
        .map(|m| Arc::new(CountingOracle::new(Arc::clone(m))))
        .collect();
    let counted = Ensemble::new(
        counters
            .iter()
            .map(|c| Arc::clone(c) as Arc<dyn GenerativeOracle>)
            .collect(),
        ensemble.s(),
    )?;
    let calls = || counters.iter().map(|c| c.calls()).sum::<u64>();
    let shape = ensemble.shape();
    let mut rng = chunk_rng(seed, chunk);
    let mut tally = Tally::empty(count_len);
    for _ in 0..trials {
        let before = calls();
        let result = consensus_sample(&counted, cfg, &mut rng)?;
        tally.max_calls_per_invocation = tally.max_calls_per_invocation.max(calls() - before);
        tally.trials += 1;
        match result {
            SampleResult::Abstain => tally.abstentions += 1,
            SampleResult::Generated {
                outcome,
                rounds_used,
            } => {
                tally.rounds_used += rounds_used;
                if let Some(counts) = &mut tally.counts {
                    if let Some(i) = shape.index_of(&outcome) {
                        counts[i] += 1;
                    }
                }
            }
        }
    }
    tally.draws = counters.iter().map(|c| c.draws()).sum();
    tally.queries = counters.iter().map(|c| c.queries()).sum();
    Ok(tally)
}

/// Runs `trials` independent invocations of the sampler.
pub fn monte_carlo(
    ensemble: &Ensemble,
    cfg: &SamplerConfig,
    trials: u64,
    seed: u64,
) -> Result<Tally> {
    let count_len = ensemble
        .shape()
        .enumerable_size()
        .filter(|&n| n <= ENUMERATION_LIMIT);
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            run_chunk(ensemble, cfg, n, seed, c, count_len)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts
        .into_iter()
        .fold(Tally::empty(count_len), Tally::merge))
}

/// Half-width used when comparing an empirical law with an exact one:
/// four binomial standard deviations per cell, summed and halved to the
/// total-variation scale, never below 0.01.
pub fn tv_tolerance(exact: &[f64], trials: u64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let n = trials as f64;
    let spread: f64 = exact
        .iter()
        .map(|&q| 4.0 * (q * (1.0 - q) / n).sqrt())
        .sum();
    (0.5 * spread).max(0.01)
}
