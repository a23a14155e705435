use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

fn bench() -> Value {
    json!({
        "landscape": {
            "name": "quartic_double_well",
            "dimension": 1,
            "depth": {"kind": "cosine", "mean": 0.5, "amplitude": 0.25},
            "phase_lag": 0.5
        },
        "sim": {"epsilon": 0.3, "mu": 0.9, "h": 0.1, "rho": 0.2, "path_count": 40, "master_seed": 9},
        "action": {"grid_size": 16}
    })
}

fn run(dir: &Path, cfg: &Value, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_resonance-lab"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("RESONANCE_LAB_SEED")
        .output()
        .unwrap()
}

#[test]
fn validate_accepts_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &bench(), &["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["twice_well_depth"]["max_relative_error"].as_f64().unwrap() <= 0.03);
    assert_eq!(report["meta"]["seed"], 9);
}

#[test]
fn window_without_epsilon_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bench();
    cfg["sim"].as_object_mut().unwrap().remove("epsilon");
    cfg["profiles"] = json!({"source": "well_depth"});
    let out = run(dir.path(), &cfg, &["window"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sim.epsilon"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bench();
    cfg["sim"]["rh0"] = json!(0.2);
    let out = run(dir.path(), &cfg, &["resonance"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rh0"));
}

#[test]
fn qp_of_a_point_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bench();
    cfg["qp"] = json!({"phase": 0.3, "x": [-1.0], "y": [-1.0]});
    let out = run(dir.path(), &cfg, &["qp"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/qp.csv")).unwrap();
    assert_eq!(csv.lines().nth(2).unwrap().split(',').nth(1), Some("0.0"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/qp.json")).unwrap()).unwrap();
    assert_eq!(summary["result"]["value"], 0.0);
}

#[test]
fn artifacts_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bench();
    cfg["profiles"] = json!({"source": "well_depth"});
    let read = |sub: &str| {
        ["window.csv", "window.json"].map(|f| fs::read(dir.path().join(sub).join(f)).unwrap())
    };
    run(dir.path(), &cfg, &["window", "--workers", "1"]);
    fs::rename(dir.path().join("out"), dir.path().join("a")).unwrap();
    run(dir.path(), &cfg, &["window", "--workers", "3"]);
    assert_eq!(read("a"), read("out"));
}

#[test]
fn seed_flag_beats_environment_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bench();
    cfg["profiles"] = json!({"source": "well_depth"});
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join("s");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_resonance-lab"));
        cmd.args(["resonance", "--config"]).arg(&path).arg("--out").arg(&out);
        cmd.env_remove("RESONANCE_LAB_SEED").stdout(Stdio::null());
        if let Some(e) = env {
            cmd.env("RESONANCE_LAB_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.status().unwrap().success());
        let v: Value = serde_json::from_str(&fs::read_to_string(out.join("resonance.json")).unwrap()).unwrap();
        v["meta"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(None, None), 9);
    assert_eq!(seed_of(Some("4"), None), 4);
    assert_eq!(seed_of(Some("4"), Some("6")), 6);
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_resonance-lab")).arg("validate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
