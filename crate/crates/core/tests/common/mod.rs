//! Random instances and brute-force reference computations shared by the
//! integration tests. Nothing here calls the library's own formulas for the
//! quantity being checked.

#![allow(dead_code)]

use consensus_core::model::FiniteDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn d(mass: &[f64]) -> FiniteDistribution {
    FiniteDistribution::new(mass.to_vec()).unwrap()
}

/// Random probability vector; each entry is zeroed with probability
/// `sparsity`, but at least one entry stays positive.
pub fn random_mass(rng: &mut impl Rng, n: usize, sparsity: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(sparsity) {
                    0.0
                } else {
                    // Exponential weights give a uniform draw on the simplex.
                    -(1.0 - rng.random::<f64>()).ln()
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|x| x / total).collect();
        }
    }
}

pub fn random_dist(rng: &mut impl Rng, n: usize, sparsity: f64) -> FiniteDistribution {
    FiniteDistribution::from_weights(random_mass(rng, n, sparsity)).unwrap()
}

pub fn random_ensemble(
    rng: &mut impl Rng,
    k: usize,
    n: usize,
    sparsity: f64,
) -> Vec<FiniteDistribution> {
    (0..k).map(|_| random_dist(rng, n, sparsity)).collect()
}

/// All subsets of `0..k` with exactly `size` elements, via bitmasks.
pub fn brute_subsets(k: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << k))
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..k).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// `min_{|S|=s} (1/s) Σ_{i∈S} v_i`, by enumerating every subset.
pub fn brute_lower_mean(values: &[f64], s: usize) -> f64 {
    brute_subsets(values.len(), s)
        .iter()
        .map(|set| set.iter().map(|&i| values[i]).sum::<f64>() / s as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn column(dists: &[FiniteDistribution], y: usize) -> Vec<f64> {
    dists.iter().map(|p| p.prob(y)).collect()
}

/// Per-round probability of proposing `y` and accepting it, from the
/// acceptance rule written out directly.
pub fn brute_round_weights(dists: &[FiniteDistribution], s: usize, slack: f64) -> Vec<f64> {
    let k = dists.len() as f64;
    (0..dists[0].len())
        .map(|y| {
            let col = column(dists, y);
            let f = col.iter().sum::<f64>() / k;
            if f == 0.0 {
                return 0.0;
            }
            let alpha = (slack.exp2() * brute_lower_mean(&col, s) / f).min(1.0);
            f * alpha
        })
        .collect()
}

/// Output masses on `Y` followed by the abstention mass, by summing over the
/// round `t` at which the sampler first accepts.
pub fn brute_law(dists: &[FiniteDistribution], s: usize, rounds: u64, slack: f64) -> Vec<f64> {
    let w = brute_round_weights(dists, s, slack);
    let accept: f64 = w.iter().sum();
    let mut out = vec![0.0; w.len()];
    let mut survive = 1.0;
    for _ in 0..rounds {
        for (o, &wy) in out.iter_mut().zip(&w) {
            *o += survive * wy;
        }
        survive *= 1.0 - accept;
    }
    out.push(survive);
    out
}

/// `Σ_y min_{i∈S} p_i(y)`.
pub fn brute_overlap(dists: &[FiniteDistribution], set: &[usize]) -> f64 {
    (0..dists[0].len())
        .map(|y| {
            set.iter()
                .map(|&i| dists[i].prob(y))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// `max_y max_{|S|=s} q(y) / avg_S(y)` with `0/0 = 0`; `None` for `+∞`.
pub fn brute_worst_case(output: &[f64], dists: &[FiniteDistribution], s: usize) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for set in brute_subsets(dists.len(), s) {
        for (y, &q) in output.iter().enumerate() {
            let avg = set.iter().map(|&i| dists[i].prob(y)).sum::<f64>() / s as f64;
            if q > 0.0 {
                if avg == 0.0 {
                    return None;
                }
                worst = worst.max(q / avg);
            }
        }
    }
    Some(worst)
}

/// `p(U)` for the set encoded by `mask`.
pub fn set_prob(mass: &[f64], mask: u64) -> f64 {
    mass.iter()
        .enumerate()
        .filter(|(y, _)| mask >> y & 1 == 1)
        .map(|(_, p)| p)
        .sum()
}

/// Pointwise median of an odd number of values.
pub fn brute_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn entropy(mass: impl IntoIterator<Item = f64>) -> f64 {
    mass.into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// `I(Q;M)` in bits from a prior and the extended laws `Pr[Q | M = m]`.
pub fn brute_mutual_information(prior: &[f64], laws: &[Vec<f64>]) -> f64 {
    let n = laws[0].len();
    let marginal: Vec<f64> = (0..n)
        .map(|y| prior.iter().zip(laws).map(|(w, l)| w * l[y]).sum())
        .collect();
    let conditional: f64 = prior
        .iter()
        .zip(laws)
        .map(|(w, l)| w * entropy(l.iter().copied()))
        .sum();
    entropy(marginal) - conditional
}

/// `log2 Σ_y max_m Pr[Q = y | M = m]` over messages with positive prior.
pub fn brute_maximal_leakage(prior: &[f64], laws: &[Vec<f64>]) -> f64 {
    let n = laws[0].len();
    let total: f64 = (0..n)
        .map(|y| {
            prior
                .iter()
                .zip(laws)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, l)| l[y])
                .fold(0.0, f64::max)
        })
        .sum();
    total.log2()
}

/// A random law on `Y ∪ {⊥}` that is `r`-risky relative to `p`:
/// `ν(y) <= r p(y)` for every `y`.
pub fn random_risky_law(rng: &mut impl Rng, p: &[f64], r: f64) -> Vec<f64> {
    let raw: Vec<f64> = p.iter().map(|&py| r * py * rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
    let mut out: Vec<f64> = raw.iter().map(|x| x * scale).collect();
    let used: f64 = out.iter().sum();
    out.push((1.0 - used).max(0.0));
    out
}
