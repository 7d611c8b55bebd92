//! Oracle backed by a subprocess speaking line-delimited JSON.
//!
//! Requests and replies, one JSON object per line:
//!
//! ```text
//! {"op":"sample","seed":17}   ->  {"y":3}
//! {"op":"logprob","y":3}      ->  {"lp":-1.5}     (null or "-inf" for zero mass)
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::RngCore;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{
    FiniteDistribution, GenerativeOracle, Outcome, OutcomeShape, ENUMERATION_LIMIT,
};

/// Allowed gap between 1 and `Σ_y 2^lp(y)`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ExternalOracle {
    command: Vec<String>,
    space: usize,
    channel: Mutex<Channel>,
    /// Filled by the consistency check on enumerable spaces.
    view: Option<FiniteDistribution>,
}

impl std::fmt::Debug for ExternalOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalOracle")
            .field("command", &self.command)
            .field("space", &self.space)
            .finish()
    }
}

fn protocol(msg: impl Into<String>) -> Error {
    Error::OracleProtocol(msg.into())
}

impl ExternalOracle {
    /// Starts the process and checks that its probabilities sum to one.
    pub fn spawn(command: &[String], space: usize) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("external oracle: empty command".into()))?;
        if space == 0 {
            return Err(Error::Config("external oracle: empty space".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut oracle = Self {
            command: command.to_vec(),
            space,
            channel: Mutex::new(Channel {
                child,
                stdin,
                stdout,
            }),
            view: None,
        };
        if space <= ENUMERATION_LIMIT {
            oracle.view = Some(oracle.check_consistency()?);
        }
        Ok(oracle)
    }

    fn check_consistency(&self) -> Result<FiniteDistribution> {
        let mut mass = Vec::with_capacity(self.space);
        for y in 0..self.space {
            mass.push(self.query_log_prob(y)?.exp2());
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > CONSISTENCY_TOLERANCE {
            return Err(protocol(format!(
                "probabilities sum to {total}, not 1 (tolerance {CONSISTENCY_TOLERANCE})"
            )));
        }
        FiniteDistribution::from_weights(mass)
    }

    fn exchange(&self, request: Value) -> Result<Value> {
        let mut ch = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        let line = request.to_string();
        writeln!(ch.stdin, "{line}")
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| protocol(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = ch
            .stdout
            .read_line(&mut reply)
            .map_err(|e| protocol(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(protocol(format!("oracle closed its output after {line}")));
        }
        serde_json::from_str(reply.trim())
            .map_err(|e| protocol(format!("malformed reply {reply:?}: {e}")))
    }

    fn query_log_prob(&self, y: usize) -> Result<f64> {
        let reply = self.exchange(json!({"op": "logprob", "y": y}))?;
        let lp = match reply.get("lp") {
            Some(Value::Null) => f64::NEG_INFINITY,
            Some(Value::String(s)) if s == "-inf" => f64::NEG_INFINITY,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| protocol(format!("bad lp in {reply}")))?,
            None => return Err(protocol(format!("missing lp in {reply}"))),
        };
        if lp.is_nan() || lp > CONSISTENCY_TOLERANCE {
            return Err(protocol(format!("log-probability {lp} for outcome {y}")));
        }
        Ok(lp.min(0.0))
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }
}

impl GenerativeOracle for ExternalOracle {
    fn shape(&self) -> OutcomeShape {
        OutcomeShape::Flat { size: self.space }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Result<Outcome> {
        let reply = self.exchange(json!({"op": "sample", "seed": rng.next_u64()}))?;
        let y = reply
            .get("y")
            .and_then(Value::as_u64)
            .ok_or_else(|| protocol(format!("bad sample reply {reply}")))? as usize;
        if y >= self.space {
            return Err(protocol(format!("sample {y} outside 0..{}", self.space)));
        }
        Ok(Outcome::Index(y))
    }

    fn log_prob(&self, outcome: &Outcome) -> Result<f64> {
        match outcome {
            Outcome::Index(y) if *y < self.space => self.query_log_prob(*y),
            other => Err(Error::OutcomeOutOfRange(other.to_string())),
        }
    }

    fn exact_view(&self) -> Option<FiniteDistribution> {
        self.view.clone()
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}
