use serde::{Deserialize, Serialize};

use super::subsets::{check_indices, check_subset_k, subsets};
use crate::consensus::probability_columns;
use crate::error::{Error, Result};
use crate::model::FiniteDistribution;

/// `Δ(S) = Σ_y min_{i∈S} p_i(y)`.
pub fn overlap(distributions: &[FiniteDistribution], subset: &[usize]) -> Result<f64> {
    let columns = probability_columns(distributions)?;
    check_indices(subset, distributions.len())?;
    Ok(overlap_of_columns(&columns, subset))
}

fn overlap_of_columns(columns: &[Vec<f64>], subset: &[usize]) -> f64 {
    columns
        .iter()
        .map(|col| subset.iter().map(|&i| col[i]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// `Δ_c(I)`: the best overlap among subsets `J ⊆ I` with `|J| = c + 1`,
/// returned with the first maximizing `J`.
pub fn maximal_overlap(
    distributions: &[FiniteDistribution],
    indices: &[usize],
    c: usize,
) -> Result<(f64, Vec<usize>)> {
    let columns = probability_columns(distributions)?;
    check_indices(indices, distributions.len())?;
    check_subset_k(indices.len())?;
    if c + 1 > indices.len() {
        return Err(Error::BadC {
            c,
            max: indices.len() - 1,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for positions in subsets(indices.len(), c + 1) {
        let chosen: Vec<usize> = positions.iter().map(|&p| indices[p]).collect();
        let value = overlap_of_columns(&columns, &chosen);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, chosen));
        }
    }
    Ok(best.expect("at least one subset of size c + 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalOverlap {
    pub c: usize,
    pub value: f64,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub subset: Vec<usize>,
    pub delta: f64,
    /// `Δ_c(S)` for `c = 0 .. |S|-1`.
    pub delta_c: Vec<MaximalOverlap>,
}

pub fn overlap_report(
    distributions: &[FiniteDistribution],
    subset: &[usize],
) -> Result<OverlapReport> {
    let delta = overlap(distributions, subset)?;
    let delta_c = (0..subset.len())
        .map(|c| {
            maximal_overlap(distributions, subset, c).map(|(value, witness)| MaximalOverlap {
                c,
                value,
                witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OverlapReport {
        subset: subset.to_vec(),
        delta,
        delta_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(mass: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(mass.to_vec()).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let p = d(&[0.3, 0.7]);
        assert!((overlap(&[p.clone(), p], &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            overlap(&[d(&[1.0, 0.0]), d(&[0.0, 1.0])], &[0, 1]).unwrap(),
            0.0
        );
        let v = overlap(&[d(&[0.8, 0.2]), d(&[0.2, 0.8])], &[0, 1]).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        assert!(matches!(
            overlap(&[d(&[1.0])], &[]),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn maximal_overlap_examples() {
        let ds = [d(&[0.8, 0.2]), d(&[0.2, 0.8]), d(&[0.5, 0.5])];
        let (v, w) = maximal_overlap(&ds, &[0, 1, 2], 0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(w.len(), 1);
        let (v, _) = maximal_overlap(&ds, &[0, 1, 2], 2).unwrap();
        assert!((v - overlap(&ds, &[0, 1, 2]).unwrap()).abs() < 1e-15);
        // Pairwise overlaps: {0,1} 0.4, {0,2} 0.7, {1,2} 0.7.
        let (v, w) = maximal_overlap(&ds, &[0, 1, 2], 1).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
        assert!(w == vec![0, 2] || w == vec![1, 2]);
        assert!(matches!(
            maximal_overlap(&ds, &[0, 1, 2], 3),
            Err(Error::BadC { c: 3, max: 2 })
        ));
    }

    #[test]
    fn report_is_monotone() {
        let ds = [
            d(&[0.8, 0.1, 0.1]),
            d(&[0.2, 0.6, 0.2]),
            d(&[0.4, 0.4, 0.2]),
        ];
        let report = overlap_report(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(report.delta_c.len(), 3);
        assert!(report.delta_c.windows(2).all(|w| w[0].value >= w[1].value));
        assert!((report.delta_c[2].value - report.delta).abs() < 1e-15);
    }
}
