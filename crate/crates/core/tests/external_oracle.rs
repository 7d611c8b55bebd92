use std::path::Path;
use std::process::Command;

use consensus_core::harness::{run_file, ExternalOracle, RunOptions, ScenarioFile};
use consensus_core::model::{GenerativeOracle, Outcome};
use consensus_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A line-protocol oracle over the given masses. `claim` is what it reports
/// for `logprob`, which may differ from `mass` to model a lying oracle.
fn script(mass: &[f64], claim: &[f64]) -> String {
    format!(
        r#"import json, math, random, sys
mass = {mass:?}
claim = {claim:?}
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "sample":
        rng = random.Random(req["seed"])
        u, acc, y = rng.random(), 0.0, len(mass) - 1
        for i, p in enumerate(mass):
            acc += p
            if u < acc:
                y = i
                break
        print(json.dumps({{"y": y}}), flush=True)
    elif req["op"] == "logprob":
        p = claim[req["y"]]
        print(json.dumps({{"lp": math.log2(p) if p > 0 else None}}), flush=True)
    else:
        print("not json", flush=True)
"#
    )
}

fn python() -> Option<String> {
    let ok = Command::new("python3")
        .arg("-c")
        .arg("pass")
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    ok.then(|| "python3".to_string())
}

fn write_script(dir: &Path, name: &str, body: &str) -> Vec<String> {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    vec![python().unwrap(), path.display().to_string()]
}

#[test]
fn honest_oracle_round_trips() {
    if python().is_none() {
        eprintln!("python3 unavailable, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mass = [0.5, 0.25, 0.25, 0.0];
    let cmd = write_script(dir.path(), "honest.py", &script(&mass, &mass));
    let oracle = ExternalOracle::spawn(&cmd, 4).unwrap();
    assert_eq!(oracle.exact_view().unwrap().mass(), &mass);
    assert_eq!(oracle.log_prob(&Outcome::Index(1)).unwrap(), -2.0);
    assert_eq!(
        oracle.log_prob(&Outcome::Index(3)).unwrap(),
        f64::NEG_INFINITY
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 4];
    for _ in 0..2000 {
        match oracle.draw(&mut rng).unwrap() {
            Outcome::Index(y) => counts[y] += 1,
            other => panic!("unexpected {other:?}"),
        }
    }
    assert_eq!(counts[3], 0);
    assert!((counts[0] as f64 / 2000.0 - 0.5).abs() < 0.05);
}

#[test]
fn misreported_probabilities_are_rejected() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cmd = write_script(dir.path(), "liar.py", &script(&[0.5, 0.5], &[0.5, 0.6]));
    match ExternalOracle::spawn(&cmd, 2) {
        Err(Error::OracleProtocol(msg)) => assert!(msg.contains("sum"), "{msg}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn malformed_replies_are_protocol_errors() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cmd = write_script(
        dir.path(),
        "garbage.py",
        "import sys\nfor line in sys.stdin:\n    print('{\"lp\": oops', flush=True)\n",
    );
    assert!(matches!(
        ExternalOracle::spawn(&cmd, 2),
        Err(Error::OracleProtocol(_))
    ));
    let cmd = write_script(dir.path(), "silent.py", "import sys\nsys.exit(0)\n");
    assert!(matches!(
        ExternalOracle::spawn(&cmd, 2),
        Err(Error::OracleProtocol(_))
    ));
}

#[test]
fn scenarios_with_external_members_run_and_fail_cleanly() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let good = write_script(dir.path(), "good.py", &script(&[0.6, 0.4], &[0.6, 0.4]));
    let bad = write_script(dir.path(), "bad.py", &script(&[0.6, 0.4], &[0.9, 0.4]));
    let file = |cmd: &[String]| {
        ScenarioFile::parse(
            &serde_json::json!({
                "schema": "consensus-scenario/v1",
                "scenarios": [{
                    "name": "external",
                    "models": [
                        {"kind": "inline", "mass": [0.5, 0.5]},
                        {"kind": "external", "command": cmd, "space": 2}
                    ],
                    "s": 1,
                    "rounds": 3,
                    "trials": 500,
                    "seed": 9
                }]
            })
            .to_string(),
        )
        .unwrap()
    };
    let report = run_file(&file(&good), RunOptions::default()).unwrap();
    let sc = &report.scenarios[0];
    assert_eq!(report.violation_count(), 0, "{:?}", sc.violations);
    let exact = sc.exact.as_ref().unwrap();
    assert!((exact.acceptance_mass - 0.9).abs() < 1e-9);
    assert!(matches!(
        run_file(&file(&bad), RunOptions::default()),
        Err(Error::OracleProtocol(_))
    ));
}
