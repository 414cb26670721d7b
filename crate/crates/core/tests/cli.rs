use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netflux")).args(args).arg("--out").arg(out).output().unwrap()
}

fn run_config(command: &str, config: &Path, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![command, "--config", config.to_str().unwrap()];
    args.extend(extra);
    (run(&args, dir.path()), dir)
}

fn record(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

#[test]
fn hadamard_single_switch_index() {
    let (out, dir) = run_config("cc-index", &configs().join("cc_hadamard_single_switch.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = record(dir.path());
    assert_eq!(r["command"]["name"], "cc-index");
    assert_eq!(r["results"]["index"].as_i64().unwrap().abs(), 1);
    assert_eq!(r["results"]["index"], r["results"]["spectral_index"]);
    assert!(r["results"]["gap"].as_f64().unwrap() >= 0.29);
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, r);
}

#[test]
fn remark_walk_index_is_two() {
    let (out, dir) = run_config("qw-index", &configs().join("qw_remark.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = record(dir.path());
    assert_eq!(r["results"]["index"], 2);
    assert!(r["residuals"]["boundary"].as_f64().unwrap() <= 1e-14);
}

#[test]
fn self_intersecting_path_is_rejected() {
    let (out, _dir) = run_config("validate", &configs().join("cc_self_intersecting.json"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn exit_codes_are_distinct() {
    let single = configs().join("cc_hadamard_single_switch.json");
    let (out, _d) = run_config("cc-index", &single, &["--tolerance", "0.09"]);
    assert_eq!(out.status.code(), Some(4));
    let (out, _d) = run_config("cc-index", &single, &["--tolerance", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let (out, _d) = run_config("qw-index", &single, &[]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let decoupled = dir.path().join("decoupled.json");
    let text = std::fs::read_to_string(&single).unwrap().replace("\"hadamard\"", "\"decoupled\"");
    std::fs::write(&decoupled, text).unwrap();
    let (out, _d) = run_config("cc-index", &decoupled, &[]);
    assert_eq!(out.status.code(), Some(3));

    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let out = run(&["cc-index", "--config", single.to_str().unwrap()], &blocked.join("sub"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evolution_is_deterministic_and_matches_golden() {
    let config = golden("qw_decoupled_evolve.json");
    let (a, da) = run_config("qw-evolve", &config, &[]);
    let (b, db) = run_config("qw-evolve", &config, &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let csv = std::fs::read_to_string(da.path().join("trace.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(db.path().join("trace.csv")).unwrap());
    assert_eq!(csv.lines().next(), Some("t,p_expect,flux_expect,norm,mean_x"));
    assert_eq!(csv, std::fs::read_to_string(golden("qw_decoupled_evolve.csv")).unwrap());
    let (mut ra, mut rb) = (record(da.path()), record(db.path()));
    ra.as_object_mut().unwrap().remove("wall_time_s");
    rb.as_object_mut().unwrap().remove("wall_time_s");
    assert_eq!(ra, rb);
}

#[test]
fn seed_flag_changes_the_config_hash() {
    let config = configs().join("qw_remark.json");
    let (_, d1) = run_config("qw-index", &config, &["--seed", "2"]);
    let (_, d2) = run_config("qw-index", &config, &["--seed", "3"]);
    let (r1, r2) = (record(d1.path()), record(d2.path()));
    assert_eq!(r1["command"]["config"]["seed"], 2);
    assert_ne!(r1["config_hash"], r2["config_hash"]);
    assert_eq!(r1["results"]["index"], 2);
    assert_eq!(r2["results"]["index"], 2);
}

#[test]
fn network_evolution_writes_trace() {
    let (out, dir) = run_config("cc-evolve", &configs().join("cc_evolve.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert!(record(dir.path())["residuals"]["telescoping"].as_f64().unwrap() <= 1e-12);
}
