use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_consensus"))
}

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/demo.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn has_python() -> bool {
    Command::new("python3")
        .args(["-c", "pass"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

#[test]
fn run_with_fixed_seed_is_byte_identical() {
    let config = demo();
    let config = config.to_str().unwrap();
    let a = run(&["run", "--config", config, "--seed", "42"]);
    let b = run(&["run", "--config", config, "--seed", "42"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);

    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["schema"], "consensus-report/v1");
    for sc in report["scenarios"].as_array().unwrap() {
        assert_eq!(sc["seed"], 42);
        assert_eq!(sc["violations"], serde_json::json!([]));
    }

    let c = run(&["run", "--config", config, "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let config = demo();
    let config = config.to_str().unwrap();
    let to_file = run(&[
        "run",
        "--config",
        config,
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(to_file.status.code(), Some(0));
    assert!(to_file.stdout.is_empty());
    let direct = run(&["run", "--config", config, "--seed", "7"]);
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn formats_and_subcommands() {
    let config = demo();
    let config = config.to_str().unwrap();

    let csv = run(&[
        "run", "--config", config, "--format", "csv", "--trials", "2000",
    ]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout(&csv);
    assert!(text.starts_with("name,k,s,rounds"));
    assert_eq!(text.lines().count(), 6);

    let curve = run(&[
        "abstention-curve",
        "--config",
        config,
        "--scenario",
        "low-overlap-majority",
        "--max-rounds",
        "20",
        "--trials",
        "1000",
    ]);
    assert_eq!(curve.status.code(), Some(0));
    let text = stdout(&curve);
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[1], "20");
    let exact: f64 = fields[2].parse().unwrap();
    let bound: f64 = fields[3].parse().unwrap();
    assert!((bound - 0.9f64.powi(20)).abs() < 1e-9);
    assert!(exact <= bound + 1e-9);

    for cmd in ["law", "overlap", "robustness", "sample"] {
        let out = run(&[cmd, "--config", config, "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
    }

    let table = run(&["leakage", "--format", "table"]);
    assert_eq!(table.status.code(), Some(0));
    assert!(stdout(&table).contains("block-encoder"));

    let steg = run(&["steg-demo", "--seed", "5"]);
    assert_eq!(steg.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&steg.stdout).unwrap();
    let certs = report["scenarios"][0]["steganography"].as_array().unwrap();
    assert!(!certs.is_empty());
    assert!(certs.iter().all(|c| c["pass"] == true));

    let pareto = run(&["pareto-audit", "--config", config, "--candidates", "500"]);
    assert_eq!(pareto.status.code(), Some(0));
}

#[test]
fn empty_scenario_file_is_a_valid_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "empty.json",
        r#"{"schema": "consensus-scenario/v1", "scenarios": []}"#,
    );
    let out = run(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["scenarios"], serde_json::json!([]));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_schema = write(
        dir.path(),
        "v9.json",
        r#"{"schema": "v9", "scenarios": []}"#,
    );
    let bad_s = write(
        dir.path(),
        "s.json",
        r#"{"schema": "consensus-scenario/v1", "scenarios": [
            {"name": "x", "models": [{"kind": "inline", "mass": [1.0]}], "s": 2, "rounds": 1}
        ]}"#,
    );
    let not_json = write(dir.path(), "broken.json", "{");
    for path in [&bad_schema, &bad_s, &not_json] {
        assert_eq!(
            run(&["run", "--config", path]).status.code(),
            Some(2),
            "{path}"
        );
    }
    assert_eq!(run(&["law"]).status.code(), Some(2));
    assert_eq!(
        run(&["run", "--config", "/nonexistent/file.json"])
            .status
            .code(),
        Some(2)
    );
    let config = demo();
    assert_eq!(
        run(&[
            "law",
            "--config",
            config.to_str().unwrap(),
            "--scenario",
            "nope"
        ])
        .status
        .code(),
        Some(2)
    );
}

fn external_scenario(dir: &Path, sampled: [f64; 2], claimed: [f64; 2]) -> String {
    let script = write(
        dir,
        &format!("oracle-{}-{}.py", claimed[0], sampled[0]),
        &format!(
            r#"import json, math, random, sys
sampled = {sampled:?}
claimed = {claimed:?}
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "sample":
        y = 0 if random.Random(req["seed"]).random() < sampled[0] else 1
        print(json.dumps({{"y": y}}), flush=True)
    else:
        print(json.dumps({{"lp": math.log2(claimed[req["y"]])}}), flush=True)
"#
        ),
    );
    let config = serde_json::json!({
        "schema": "consensus-scenario/v1",
        "scenarios": [{
            "name": "external",
            "models": [{"kind": "external", "command": ["python3", script], "space": 2}],
            "s": 1,
            "rounds": 2,
            "trials": 20000,
            "seed": 1
        }]
    });
    write(
        dir,
        &format!("scenario-{}-{}.json", claimed[0], sampled[0]),
        &config.to_string(),
    )
}

#[test]
fn oracle_protocol_errors_exit_with_3() {
    if !has_python() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = external_scenario(dir.path(), [0.5, 0.5], [0.5, 0.7]);
    let out = run(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol"));
}

#[test]
fn sampler_disagreeing_with_its_probabilities_exits_with_1() {
    if !has_python() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    // Probabilities sum to one, but draws come from another distribution, so
    // the empirical law drifts away from the exact one.
    let path = external_scenario(dir.path(), [0.9, 0.1], [0.5, 0.5]);
    let out = run(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["scenarios"][0]["empirical"]["pass"], false);

    let honest = external_scenario(dir.path(), [0.5, 0.5], [0.5, 0.5]);
    assert_eq!(run(&["run", "--config", &honest]).status.code(), Some(0));
}
