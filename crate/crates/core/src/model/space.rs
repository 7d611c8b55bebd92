use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest output space that analysis routines will enumerate exhaustively.
pub const ENUMERATION_LIMIT: usize = 1 << 16;

/// A finite output space `Y = {0, .., size-1}` with optional display labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpace {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl OutputSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidSpace("size must be at least 1".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("size must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of an outcome: its label if present, else the index.
    pub fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(labels) if index < labels.len() => labels[index].clone(),
            _ => index.to_string(),
        }
    }

    pub(crate) fn ensure_same(&self, other: &OutputSpace) -> Result<()> {
        if self.size != other.size {
            return Err(Error::SpaceMismatch {
                expected: format!("|Y| = {}", self.size),
                found: format!("|Y| = {}", other.size),
            });
        }
        Ok(())
    }
}

/// A single generation `y`.
///
/// Flat spaces index outcomes directly; token models produce fixed-length
/// sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Index(usize),
    Sequence(Vec<usize>),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Index(i) => write!(f, "{i}"),
            Outcome::Sequence(tokens) => {
                write!(f, "[")?;
                for (n, t) in tokens.iter().enumerate() {
                    if n > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// The outcome type produced by an oracle. Ensemble members must agree on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeShape {
    Flat { size: usize },
    Sequence { vocab: usize, horizon: usize },
}

impl OutcomeShape {
    /// Number of outcomes, when it fits in `usize`.
    pub fn cardinality(&self) -> Option<usize> {
        match *self {
            OutcomeShape::Flat { size } => Some(size),
            OutcomeShape::Sequence { vocab, horizon } => {
                vocab.checked_pow(u32::try_from(horizon).ok()?)
            }
        }
    }

    /// Cardinality if the space is small enough to enumerate.
    pub fn enumerable_size(&self) -> Option<usize> {
        self.cardinality().filter(|&n| n <= ENUMERATION_LIMIT)
    }

    pub fn contains(&self, outcome: &Outcome) -> bool {
        match (self, outcome) {
            (OutcomeShape::Flat { size }, Outcome::Index(i)) => i < size,
            (OutcomeShape::Sequence { vocab, horizon }, Outcome::Sequence(tokens)) => {
                tokens.len() == *horizon && tokens.iter().all(|t| t < vocab)
            }
            _ => false,
        }
    }

    /// Flat index of an outcome (big-endian base-`vocab` for sequences).
    pub fn index_of(&self, outcome: &Outcome) -> Option<usize> {
        if !self.contains(outcome) {
            return None;
        }
        match (self, outcome) {
            (OutcomeShape::Flat { .. }, Outcome::Index(i)) => Some(*i),
            (OutcomeShape::Sequence { vocab, .. }, Outcome::Sequence(tokens)) => tokens
                .iter()
                .try_fold(0usize, |acc, &t| acc.checked_mul(*vocab)?.checked_add(t)),
            _ => None,
        }
    }

    /// Inverse of [`OutcomeShape::index_of`].
    pub fn outcome_at(&self, index: usize) -> Outcome {
        match *self {
            OutcomeShape::Flat { .. } => Outcome::Index(index),
            OutcomeShape::Sequence { vocab, horizon } => {
                let mut tokens = vec![0; horizon];
                let mut rest = index;
                for slot in tokens.iter_mut().rev() {
                    *slot = rest % vocab;
                    rest /= vocab;
                }
                Outcome::Sequence(tokens)
            }
        }
    }
}

impl fmt::Display for OutcomeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeShape::Flat { size } => write!(f, "flat space of size {size}"),
            OutcomeShape::Sequence { vocab, horizon } => {
                write!(f, "sequences of length {horizon} over vocab {vocab}")
            }
        }
    }
}
