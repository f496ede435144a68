use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn curvegas(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_curvegas"))
        .arg("--config")
        .arg(&path)
        .arg("--output")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("CURVEGAS_THREADS")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SIMULATE: &str = r#"{"command":"simulate","curve":{"kind":"circle","radius":1.0},
  "params":{"n":8,"beta":2.0,"dt":1e-3,"t_end":0.5,"n_frames":20},"seed":42}"#;

#[test]
fn simulate_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvegas(dir.path(), SIMULATE, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,x4,x5,x6,x7,x8");
    assert_eq!(lines.count(), 21);
    let meta = read_json(&dir.path().join("out/trajectory.meta.json"));
    assert_eq!(meta["schema"], "curvegas.trajectory/1");
    assert_eq!(meta["particles"], 8);
    assert_eq!(meta["meta"]["seed"], 42);
}

#[test]
fn format_flag_switches_to_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvegas(dir.path(), SIMULATE, &["--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc = read_json(&dir.path().join("out/trajectory.json"));
    assert_eq!(doc["times"].as_array().unwrap().len(), 21);
    assert_eq!(doc["curve_points"][0].as_array().unwrap().len(), 8);
    assert!(!dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn fekete_on_circle_reaches_n_to_the_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvegas(dir.path(), r#"{"command":"fekete","params":{"n":4}}"#, &["--seed", "11"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc = read_json(&dir.path().join("out/fekete.json"));
    let d = doc["result"]["discriminant"].as_f64().unwrap();
    assert!((d / 256.0 - 1.0).abs() < 1e-6, "{d}");
    assert_eq!(doc["seed"], 11);
}

#[test]
fn beta_below_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"simulate","params":{"n":8,"beta":0.5,"dt":1e-3,"t_end":1}}"#;
    let out = curvegas(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("params.beta") && msg.contains("β ≥ 1"), "{msg}");
    assert!(!dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn malformed_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        "{not json",
        r#"{"command":"fekete","params":{"n":1}}"#,
        r#"{"command":"fekete","params":{"n":4},"seed":-1}"#,
        r#"{"command":"capacity","params":{"n_list":[]}}"#,
    ] {
        let out = curvegas(dir.path(), cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{cfg}: {}", stderr(&out));
    }
    let out = curvegas(dir.path(), SIMULATE, &["--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = Command::new(env!("CARGO_BIN_EXE_curvegas"))
        .args(["--config", "/nonexistent/curvegas.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unconverged_flow_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"fekete","params":{"n":6,"max_iter":3,"initial":"clustered"}}"#;
    let out = curvegas(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let doc = read_json(&dir.path().join("out/fekete.json"));
    assert_eq!(doc["result"]["converged"], false);
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(curvegas(a.path(), SIMULATE, &[]).status.success());
    assert!(curvegas(b.path(), SIMULATE, &["--threads", "1"]).status.success());
    assert!(curvegas(c.path(), SIMULATE, &["--seed", "43"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("out/trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
    let meta = |d: &Path| std::fs::read(d.join("out/trajectory.meta.json")).unwrap();
    assert_eq!(meta(a.path()), meta(b.path()));
}

#[test]
fn thread_count_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"command":"sample","params":{"n":3,"beta":2,"n_samples":50,"burn_in":20,"chains":3}}"#)
        .unwrap();
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_curvegas"))
            .arg("--config")
            .arg(&path)
            .arg("--output")
            .arg(dir.path().join(threads))
            .env("CURVEGAS_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read(dir.path().join(threads).join("samples.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn diagnose_reports_and_flags_corrupted_drift() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvegas(dir.path(), r#"{"command":"diagnose"}"#, &[]);
    let report = read_json(&dir.path().join("out/diagnostics.json"));
    let failed: Vec<&Value> = report["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(out.status.success(), "{failed:?}");
    assert_eq!(report["schema_version"], 1);

    let out = curvegas(dir.path(), r#"{"command":"diagnose","params":{"corrupt_drift":true}}"#, &[]);
    assert_eq!(out.status.code(), Some(3));
    let report = read_json(&dir.path().join("out/diagnostics.json"));
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["stationarity_residual_n2", "stationarity_residual_n3"]);
}
