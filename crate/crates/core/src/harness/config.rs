use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consensus::RoundBudget;
use crate::error::{Error, Result};
use crate::model::TokenModelSpec;

pub const SCHEMA: &str = "consensus-scenario/v1";

/// A scenario file: `{"schema": "consensus-scenario/v1", "scenarios": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
}

impl ScenarioFile {
    pub fn new(scenarios: Vec<ScenarioConfig>) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            scenarios,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                file.schema
            )));
        }
        for sc in &file.scenarios {
            sc.validate()?;
        }
        Ok(file)
    }

    /// Reads and validates a scenario file. Relative token-model paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut file = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for sc in &mut file.scenarios {
            for model in &mut sc.models {
                if let ModelSpec::TokenModel { path: Some(p), .. } = model {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        Ok(file)
    }
}

fn default_trials() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub models: Vec<ModelSpec>,
    pub s: usize,
    pub rounds: RoundBudget,
    #[serde(default)]
    pub slack: f64,
    /// Named unsafe sets, as outcome indices.
    #[serde(default)]
    pub unsafe_sets: BTreeMap<String, Vec<usize>>,
    /// Message id for every outcome index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<Vec<usize>>,
    /// Members believed safe. Used for reported bounds only; the sampler
    /// never sees it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_set_hint: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Prompt index, required when any model is a prompt table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<usize>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.models.len();
        if k == 0 {
            return Err(Error::Config(format!(
                "scenario {:?}: no models",
                self.name
            )));
        }
        if self.s == 0 || self.s > k {
            return Err(Error::Config(format!(
                "scenario {:?}: s = {} must lie in 1..={k}",
                self.name, self.s
            )));
        }
        if !self.slack.is_finite() || self.slack < 0.0 {
            return Err(Error::Config(format!(
                "scenario {:?}: slack must be finite and non-negative",
                self.name
            )));
        }
        if let Some(hint) = &self.safe_set_hint {
            let mut seen = vec![false; k];
            for &i in hint {
                if i >= k || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!(
                        "scenario {:?}: bad safe_set_hint index {i}",
                        self.name
                    )));
                }
            }
        }
        let prompted = self
            .models
            .iter()
            .any(|m| matches!(m, ModelSpec::Prompted { .. }));
        if prompted && self.prompt.is_none() {
            return Err(Error::Config(format!(
                "scenario {:?}: prompt tables need a prompt",
                self.name
            )));
        }
        Ok(())
    }
}

/// How one ensemble member is realized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Explicit probability vector.
    Inline { mass: Vec<f64> },
    /// Token model given inline or as a JSON file.
    TokenModel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<TokenModelSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
    },
    /// Subprocess speaking the line-delimited JSON oracle protocol.
    External { command: Vec<String>, space: usize },
    Adversary {
        attack: AttackKind,
        #[serde(default)]
        params: AdversaryParams,
    },
    /// One probability vector per prompt.
    Prompted { table: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Uniform over an unsafe set.
    UnsafeUniform,
    /// Uniform over the outcomes decoding to a target message.
    StegEncoder,
    /// Uniform over the outcomes no safe member supports.
    AbstentionForcer,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryParams {
    /// Outcome space size; defaults to the other members' size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<usize>,
    /// Target set for `unsafe-uniform`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsafe_set: Option<Vec<usize>>,
    /// Decoder for `steg-encoder`; defaults to the scenario decoder, then
    /// to index parity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<usize>,
    /// Outcomes the safe members support, for `abstention-forcer`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_support: Option<Vec<usize>>,
}
