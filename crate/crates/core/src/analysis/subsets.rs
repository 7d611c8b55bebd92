use crate::error::{Error, Result};

/// Largest ensemble size for routines that enumerate index subsets.
pub const MAX_SUBSET_K: usize = 12;

/// All `size`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Subsets {
    Subsets {
        n,
        current: if size <= n {
            Some((0..size).collect())
        } else {
            None
        },
    }
}

#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let size = out.len();
        let mut next = out.clone();
        let mut i = size;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - size + i {
                next[i] += 1;
                for j in i + 1..size {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

pub(crate) fn check_subset_k(k: usize) -> Result<()> {
    if k > MAX_SUBSET_K {
        return Err(Error::TooLarge(format!(
            "k = {k} exceeds the subset-enumeration cap of {MAX_SUBSET_K}"
        )));
    }
    Ok(())
}

/// Validates an index subset of `0..k`: nonempty, in range, no repeats.
pub(crate) fn check_indices(indices: &[usize], k: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut seen = vec![false; k];
    for &i in indices {
        if i >= k {
            return Err(Error::InvalidSubset(format!(
                "index {i} out of range 0..{k}"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidSubset(format!("index {i} repeated")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, r: usize) -> usize {
        (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn counts_match_binomials() {
        for n in 0..=8 {
            for r in 0..=n {
                let all: Vec<_> = subsets(n, r).collect();
                assert_eq!(all.len(), binomial(n, r), "C({n},{r})");
                assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
        assert_eq!(subsets(3, 4).count(), 0);
        assert_eq!(subsets(12, 6).count(), 924);
    }

    #[test]
    fn index_checks() {
        assert!(check_indices(&[0, 2], 3).is_ok());
        assert!(matches!(check_indices(&[], 3), Err(Error::EmptySubset)));
        assert!(check_indices(&[3], 3).is_err());
        assert!(check_indices(&[1, 1], 3).is_err());
    }
}
