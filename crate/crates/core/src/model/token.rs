//! Toy autoregressive models over fixed-length token sequences.
//!
//! A model is a table of next-token conditionals. Level `t` of the table
//! holds the rows consulted when emitting token `t`, and its row count picks
//! how much of the prefix the conditional sees:
//!
//! * one row: the conditional ignores the prefix,
//! * `vocab^t` rows: the full prefix, read as a big-endian base-`vocab` index,
//! * `vocab` rows (for `t >= 1`): only the previous token.
//!
//! Sequence probabilities are accumulated in base-2 log space so that long
//! horizons do not underflow.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::distribution::FiniteDistribution;
use super::space::{Outcome, OutcomeShape};
use crate::error::{Error, Result};

/// JSON form: `{"vocab": V, "horizon": T, "table": [[[..]]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenModelSpec {
    pub vocab: usize,
    pub horizon: usize,
    pub table: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    Shared,
    FullPrefix,
    PreviousToken,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    context: Context,
    rows: Vec<Vec<f64>>,
    log_rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenModel {
    vocab: usize,
    horizon: usize,
    levels: Vec<Level>,
}

impl TokenModel {
    pub fn new(vocab: usize, horizon: usize, table: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if vocab == 0 || horizon == 0 {
            return Err(Error::InvalidTokenModel(
                "vocab and horizon must be positive".into(),
            ));
        }
        if table.len() != horizon {
            return Err(Error::InvalidTokenModel(format!(
                "table has {} levels, horizon is {horizon}",
                table.len()
            )));
        }
        let mut levels = Vec::with_capacity(horizon);
        for (t, rows) in table.into_iter().enumerate() {
            let full = u32::try_from(t).ok().and_then(|e| vocab.checked_pow(e));
            let context = if rows.len() == 1 {
                Context::Shared
            } else if Some(rows.len()) == full {
                Context::FullPrefix
            } else if t >= 1 && rows.len() == vocab {
                Context::PreviousToken
            } else {
                return Err(Error::InvalidTokenModel(format!(
                    "level {t} has {} rows; expected 1, {vocab}, or vocab^{t}",
                    rows.len()
                )));
            };
            for (r, row) in rows.iter().enumerate() {
                if row.len() != vocab {
                    return Err(Error::InvalidTokenModel(format!(
                        "level {t} row {r} has {} entries, vocab is {vocab}",
                        row.len()
                    )));
                }
                FiniteDistribution::new(row.clone())
                    .map_err(|e| Error::InvalidTokenModel(format!("level {t} row {r}: {e}")))?;
            }
            let log_rows = rows
                .iter()
                .map(|row| row.iter().map(|p| p.log2()).collect())
                .collect();
            levels.push(Level {
                context,
                rows,
                log_rows,
            });
        }
        Ok(Self {
            vocab,
            horizon,
            levels,
        })
    }

    pub fn from_spec(spec: TokenModelSpec) -> Result<Self> {
        Self::new(spec.vocab, spec.horizon, spec.table)
    }

    pub fn to_spec(&self) -> TokenModelSpec {
        TokenModelSpec {
            vocab: self.vocab,
            horizon: self.horizon,
            table: self.levels.iter().map(|l| l.rows.clone()).collect(),
        }
    }

    /// Every conditional uniform over the vocabulary.
    pub fn uniform(vocab: usize, horizon: usize) -> Result<Self> {
        Self::stationary(vec![1.0 / vocab.max(1) as f64; vocab], horizon)
    }

    /// The same next-token distribution at every position.
    pub fn stationary(row: Vec<f64>, horizon: usize) -> Result<Self> {
        let vocab = row.len();
        Self::new(vocab, horizon, vec![vec![row]; horizon])
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn shape(&self) -> OutcomeShape {
        OutcomeShape::Sequence {
            vocab: self.vocab,
            horizon: self.horizon,
        }
    }

    fn row_index(&self, t: usize, prefix: &[usize]) -> usize {
        match self.levels[t].context {
            Context::Shared => 0,
            Context::PreviousToken => prefix[t - 1],
            Context::FullPrefix => prefix[..t]
                .iter()
                .fold(0, |acc, &tok| acc * self.vocab + tok),
        }
    }

    /// Next-token distribution after `prefix` (length below the horizon).
    pub fn conditional(&self, prefix: &[usize]) -> Result<&[f64]> {
        let t = prefix.len();
        if t >= self.horizon {
            return Err(Error::LengthMismatch {
                expected: self.horizon - 1,
                found: t,
            });
        }
        self.check_tokens(prefix)?;
        Ok(&self.levels[t].rows[self.row_index(t, prefix)])
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        match tokens.iter().find(|&&tok| tok >= self.vocab) {
            Some(tok) => Err(Error::OutcomeOutOfRange(format!(
                "token {tok} (vocab {})",
                self.vocab
            ))),
            None => Ok(()),
        }
    }

    /// `log2 p(y) = sum over i of log2 p(y_i | y_1 .. y_{i-1})`.
    pub fn log_prob(&self, tokens: &[usize]) -> Result<f64> {
        if tokens.len() != self.horizon {
            return Err(Error::LengthMismatch {
                expected: self.horizon,
                found: tokens.len(),
            });
        }
        self.check_tokens(tokens)?;
        let mut total = 0.0;
        for t in 0..self.horizon {
            let lp = self.levels[t].log_rows[self.row_index(t, tokens)][tokens[t]];
            if lp == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += lp;
        }
        Ok(total)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<usize> {
        let mut tokens = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let row = &self.levels[t].rows[self.row_index(t, &tokens)];
            let u: f64 = rng.random();
            tokens.push(super::distribution::sample_index(row, u));
        }
        tokens
    }

    /// The induced distribution over all `vocab^horizon` sequences, indexed
    /// as in [`OutcomeShape::index_of`]. `None` when too large to enumerate.
    pub fn enumerate(&self) -> Option<FiniteDistribution> {
        let shape = self.shape();
        let n = shape.enumerable_size()?;
        let mass: Vec<f64> = (0..n)
            .map(|i| match shape.outcome_at(i) {
                Outcome::Sequence(tokens) => self.log_prob(&tokens).map(f64::exp2).unwrap_or(0.0),
                Outcome::Index(_) => 0.0,
            })
            .collect();
        FiniteDistribution::from_derived(mass).ok()
    }
}

/// Log-probability (base 2) of a complete sequence under `model`.
pub fn token_model_prob(model: &TokenModel, y: &Outcome) -> Result<f64> {
    match y {
        Outcome::Sequence(tokens) => model.log_prob(tokens),
        Outcome::Index(_) => Err(Error::LengthMismatch {
            expected: model.horizon(),
            found: 1,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[usize]) -> Outcome {
        Outcome::Sequence(tokens.to_vec())
    }

    #[test]
    fn deterministic_chain_has_log_prob_zero() {
        // 0 -> 1 -> 2 -> 0 cycle, vocab 3, horizon 4, previous-token context.
        let cycle = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ];
        let table = vec![
            vec![vec![1.0, 0.0, 0.0]],
            cycle.clone(),
            cycle.clone(),
            cycle,
        ];
        let model = TokenModel::new(3, 4, table).unwrap();
        assert_eq!(token_model_prob(&model, &seq(&[0, 1, 2, 0])).unwrap(), 0.0);
        assert_eq!(
            token_model_prob(&model, &seq(&[0, 2, 2, 0])).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn uniform_model_log_prob() {
        let model = TokenModel::uniform(4, 5).unwrap();
        let lp = token_model_prob(&model, &seq(&[3, 1, 0, 2, 2])).unwrap();
        assert!((lp - (-5.0 * 4f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn two_token_example() {
        let model =
            TokenModel::new(2, 2, vec![vec![vec![0.75, 0.25]], vec![vec![0.5, 0.5]]]).unwrap();
        // Oracle: enumerate the four sequences by hand.
        let expected = [0.375, 0.375, 0.125, 0.125];
        let mut total = 0.0;
        for (i, tokens) in [[0, 0], [0, 1], [1, 0], [1, 1]].iter().enumerate() {
            let p = token_model_prob(&model, &seq(tokens)).unwrap().exp2();
            assert!((p - expected[i]).abs() < 1e-15);
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-15);
        let lp = token_model_prob(&model, &seq(&[0, 1])).unwrap();
        assert!((lp - 0.375f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn length_and_vocab_errors() {
        let model = TokenModel::uniform(2, 3).unwrap();
        assert!(matches!(
            token_model_prob(&model, &seq(&[0, 1])),
            Err(Error::LengthMismatch {
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            token_model_prob(&model, &Outcome::Index(0)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(token_model_prob(&model, &seq(&[0, 2, 1])).is_err());
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(TokenModel::new(2, 2, vec![vec![vec![0.5, 0.5]]]).is_err());
        assert!(TokenModel::new(2, 1, vec![vec![vec![0.6, 0.5]]]).is_err());
        assert!(TokenModel::new(
            3,
            2,
            vec![vec![vec![1.0, 0.0, 0.0]], vec![vec![1.0, 0.0, 0.0]; 2]]
        )
        .is_err());
    }

    #[test]
    fn long_horizon_does_not_underflow() {
        let model = TokenModel::uniform(1000, 200).unwrap();
        let tokens = vec![7; 200];
        let lp = model.log_prob(&tokens).unwrap();
        assert!(lp.is_finite());
        assert!((lp + 200.0 * 1000f64.log2()).abs() < 1e-6);
    }
}
