use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn harmap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harmap"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    harmap().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn reports(path: &Path) -> Vec<Value> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_array().unwrap().clone()
}

#[test]
fn flat_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let cfg = configs().join("flat2.json");
    let o = run(&["suite", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reps = reports(&out);
    let ids: Vec<&str> = reps.iter().map(|r| r["check_id"].as_str().unwrap()).collect();
    for want in ["bianchi", "adjointness", "decompose-berger-ebin", "decompose-york", "decompose-alpha"] {
        assert!(ids.contains(&want), "{want} missing from {ids:?}");
    }
    assert!(reps.iter().all(|r| r["status"] == "pass"));
    assert!(reps.iter().all(|r| r["metadata"].get("runtime_ms").is_none()));
}

#[test]
fn unknown_task_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"manifold": {"dim": 2, "resolution": 16}, "tasks": ["bianchi", "no-such-task", "energy"]}"#,
    );
    let out = dir.path().join("r.json");
    let o = run(&["suite", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let reps = reports(&out);
    assert_eq!(reps.len(), 3);
    assert_eq!(reps[0]["status"], "pass");
    assert_eq!(reps[1]["status"], "fail");
    assert!(reps[1]["reason"].as_str().unwrap().contains("unknown task"));
    assert_eq!(reps[2]["status"], "pass");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let indefinite = write(
        dir.path(),
        "bad.json",
        r#"{"manifold": {"dim": 2, "resolution": 8}, "metric": {"upper": [["1 + 2*sin(x1)", "0"], ["1"]]}}"#,
    );
    let o = run(&["suite", "--config", indefinite.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive definite"));

    let aperiodic = write(
        dir.path(),
        "map.json",
        r#"{"manifold": {"dim": 2, "resolution": 8}, "map": {"winding": [[1, 0], [0, 1]], "displacement": ["x1", "0"]}}"#,
    );
    assert_eq!(run(&["verify-map", "--config", aperiodic.to_str().unwrap()]).status.code(), Some(2));

    let malformed = write(dir.path(), "m.json", "{ not json");
    assert_eq!(run(&["suite", "--config", malformed.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["suite", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
    assert_eq!(run(&["suite"]).status.code(), Some(2));

    let cfg = configs().join("flat2.json");
    let o = harmap()
        .args(["suite", "--config", cfg.to_str().unwrap()])
        .env("HARMAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decompose_prints_orthogonality_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let cfg = configs().join("bump3.json");
    let o = run(&[
        "decompose",
        "--config",
        cfg.to_str().unwrap(),
        "--kind",
        "york",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(diag["kind"], "york");
    let table = diag["orthogonality"].as_array().unwrap();
    assert!(table.iter().any(|row| row["first"] == "killing" && row["second"] == "phi_tt"));
    assert!(diag["reconstruction"].as_f64().unwrap() < 1e-6);
    let reps = reports(&out);
    assert_eq!(reps[0]["check_id"], "decompose-york");
    assert_eq!(reps[0]["metadata"]["resolution"], serde_json::json!([24, 24, 24]));
}

#[test]
fn non_harmonic_map_skips_corollaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let cfg = configs().join("wave_map.json");
    let o = run(&["verify-map", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reps = reports(&out);
    let status = |id: &str| reps.iter().find(|r| r["check_id"] == id).unwrap()["status"].clone();
    assert_eq!(status("theorem1"), "pass");
    assert_eq!(status("corollary1"), "skipped");
    assert_eq!(status("corollary2"), "skipped");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"manifold": {"dim": 2, "resolution": 16}, "metric": "conformal-T2",
            "tasks": ["bianchi", "adjointness", "decompose-alpha", "classify", "variation-ricci"], "seed": 3}"#,
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}.json"));
        let o = harmap()
            .args(["suite", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("HARMAP_THREADS", if k == 0 { "1" } else { "4" })
            .output()
            .unwrap();
        assert!(o.status.code().unwrap() <= 1);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let cfg = configs().join("flat2.json");
    let o = run(&[
        "verify-geometry",
        "--config",
        cfg.to_str().unwrap(),
        "--resolution",
        "8",
        "--seed",
        "7",
        "--tol",
        "1e-9",
        "--timings",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in reports(&out) {
        assert_eq!(r["metadata"]["resolution"], serde_json::json!([8, 8]));
        assert_eq!(r["metadata"]["seed"], 7);
        assert!(r["metadata"]["runtime_ms"].as_f64().is_some());
    }
}
