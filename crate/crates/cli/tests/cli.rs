use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use husimi_lab_cli::manifest::{verify, Manifest, MANIFEST_FILE};
use tempfile::tempdir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_husimi-lab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn wehrl_of_mixed_state_writes_report_and_manifest() {
    let dir = tempdir().unwrap();
    let out = run(&["wehrl", "--state", "mixed"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("wehrl.json")).unwrap()).unwrap();
    let s = report["estimate"].as_f64().unwrap();
    assert!((s - (4.0 * std::f64::consts::PI).ln()).abs() < 1e-10);
    let m = manifest(dir.path());
    assert_eq!(m.command, "wehrl");
    assert_eq!(m.config.state.as_deref(), Some("mixed"));
    assert!(verify(dir.path(), &m).unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let bad_state = run(&["wehrl", "--state", "no-such-file.json"], &dir.path().join("a"));
    assert_eq!(bad_state.status.code(), Some(2));
    let underfilled = run(&["experiment", "--state", "coherent", "-m", "100"], &dir.path().join("b"));
    assert_eq!(underfilled.status.code(), Some(3));
    let zero_threads = run(&["wehrl", "--threads", "0"], &dir.path().join("c"));
    assert_eq!(zero_threads.status.code(), Some(2));
}

#[test]
fn selftest_fails_when_tolerances_are_squeezed() {
    let dir = tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_husimi-lab"))
        .args(["selftest", "--out"])
        .arg(dir.path())
        .env("HUSIMI_SELFTEST_TOL_SCALE", "1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn toml_config_is_overridden_by_flags() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 5\nm = 50000\nstate = \"mixed\"\nvariant = \"b\"\n").unwrap();
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "6"], &dir.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("o"));
    assert_eq!(m.config.seed, Some(6));
    assert_eq!(m.config.m, Some(50_000));
    assert!(m.outputs.contains_key("log.csv") && m.outputs.contains_key("gof.json"));
}

#[test]
fn manifest_of_another_command_is_refused() {
    let dir = tempdir().unwrap();
    assert!(run(&["wehrl", "--state", "mixed"], &dir.path().join("w")).status.success());
    let path = dir.path().join("w").join(MANIFEST_FILE);
    let out = run(&["cv", "--config", path.to_str().unwrap()], &dir.path().join("c"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_input_errors() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "sede = 1\n").unwrap();
    let out = run(&["wehrl", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}
