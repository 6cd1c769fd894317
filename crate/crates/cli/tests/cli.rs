use std::path::Path;
use std::process::{Command, Output};

fn sbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("SBM_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn phase_diagram_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["phase-diagram", "--k", "1", "--gamma", "0.1:3:20", "--eta", "0.1:3:15"];
    assert!(sbm(a.path(), &args).status.success());
    assert!(sbm(b.path(), &args).status.success());
    for f in ["phase_diagram.csv", "manifest.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let csv = String::from_utf8(read(a.path(), "phase_diagram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 15);
    assert!(csv.starts_with("gamma,eta,phase,lambda_1,u_sq_1,h_sq,mu,d,a\n"));
}

#[test]
fn manifest_records_params_hash_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sbm(dir.path(), &["tempered", "--omega", "2.2", "--gamma", "0.1,0.3,1"]).status.success());
    let m: serde_json::Value = serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(m["command"], "tempered");
    assert_eq!(m["params"]["gamma"], serde_json::json!([0.1, 0.3, 1.0]));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["tempered.csv", "thresholds.csv"]);
    let csv = String::from_utf8(read(dir.path(), "tempered.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).filter(|l| l.contains("reverse")).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(labels, ["warm", "cold", "map"]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"double-descent\"\neta = [1, 3]\ngamma = \"0.05:1.5:30\"\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(["double-descent", "--eta", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let m: serde_json::Value = serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    assert_eq!(m["params"]["eta"], serde_json::json!([3.0]));
    assert_eq!(m["params"]["gamma"].as_array().unwrap().len(), 30);
}

#[test]
fn json_format_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sbm(dir.path(), &["kl-sweep", "--gamma", "0.5,2", "--eta", "1", "--format", "json"]).status.success());
    let v: serde_json::Value = serde_json::from_slice(&read(dir.path(), "kl_sweep.json")).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["report"]["gamma"], 2.0);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(["phase-diagram", "--gamma", "1", "--eta", "1"])
        .env("SBM_OUTPUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("phase_diagram.csv").exists());
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "gamma = 1\ntypo = 2\n").unwrap();
    let out = sbm(dir.path(), &["phase-diagram", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo") && err.contains("line 2"), "{err}");

    assert_eq!(sbm(dir.path(), &["phase-diagram", "--gamma", "1:2:0"]).status.code(), Some(2));
    assert_eq!(sbm(dir.path(), &["phase-diagram", "--gamma", "-1", "--eta", "1"]).status.code(), Some(2));
    assert_eq!(sbm(dir.path(), &["validate", "--only", "13"]).status.code(), Some(2));
    // nu*dt beyond the stability guard is a numerical failure.
    let code = sbm(dir.path(), &["dmft", "--nu", "100", "--dt", "0.05", "--t-max", "1"]).status.code();
    assert_eq!(code, Some(3));
}

#[test]
fn langevin_run_is_reproducible_at_fixed_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["langevin", "--n", "60", "--seeds", "2", "--seed", "7", "--t-max", "0.5", "--dt", "0.01"];
    assert!(sbm(a.path(), &args).status.success());
    assert!(sbm(b.path(), &args).status.success());
    assert_eq!(read(a.path(), "ensemble.csv"), read(b.path(), "ensemble.csv"));
    let m: serde_json::Value = serde_json::from_slice(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(m["seed"], 7);
}

#[test]
fn quick_criteria_pass_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = sbm(dir.path(), &["validate", "--only", "6,9"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("PASS")).count(), 2);
}
