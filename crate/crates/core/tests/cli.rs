//! End-to-end tests of the command-line binary: exit codes, the manifest,
//! and bit-for-bit reproducibility of outputs across identical runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn detform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SIM_CFG: &str = "\
seed = 7
[experiment]
name = cli-test
[grid]
resolution = 32
[flow]
nu = 1.0
force = kolmogorov:k=(0,2):4.0
[simulate]
u0 = random:1.5:0.2
t_final = 0.2
record_every = 5
";

#[test]
fn simulate_run_succeeds_and_is_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "sim.cfg", SIM_CFG);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let res = detform(&["--config", &cfg, "--out", out.to_str().unwrap(), "simulate"]);
        assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
        let stdout = String::from_utf8_lossy(&res.stdout);
        assert!(stdout.contains("PASS"), "expected PASS lines, got: {stdout}");
        assert!(!stdout.contains("FAIL"), "unexpected FAIL line: {stdout}");
    }
    for file in ["timeseries.csv", "final.dfl", "final_coefficients.csv"] {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // the manifest lists every output with a digest
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 3);
    for entry in outputs {
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn seed_flag_changes_random_initial_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "sim.cfg", SIM_CFG);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let r1 = detform(&["--config", &cfg, "--out", out_a.to_str().unwrap(), "--seed", "1", "simulate"]);
    let r2 = detform(&["--config", &cfg, "--out", out_b.to_str().unwrap(), "--seed", "2", "simulate"]);
    assert_eq!(r1.status.code(), Some(0));
    assert_eq!(r2.status.code(), Some(0));
    let a = fs::read(out_a.join("final.dfl")).unwrap();
    let b = fs::read(out_b.join("final.dfl")).unwrap();
    assert_ne!(a, b, "different seeds must give different fields");
}

#[test]
fn duplicate_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "dup.cfg",
        "seed = 1\n[flow]\nnu = 1.0\nnu = 2.0\nforce = kolmogorov:k=(0,2):4.0\n",
    );
    let res = detform(&["--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "simulate"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("flow.nu"), "error names the key: {err}");
    assert!(err.contains("lines"), "error cites both lines: {err}");
}

#[test]
fn unknown_key_and_missing_seed_reported_together() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bad.cfg",
        "[flow]\nnu = 1.0\nforce = kolmogorov:k=(0,2):4.0\nturbo = yes\n",
    );
    let res = detform(&["--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "simulate"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("flow.turbo"), "unknown key named: {err}");
    assert!(err.contains("seed"), "missing seed named: {err}");
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = detform(&[
        "--config",
        tmp.path().join("nope.cfg").to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn bounds_sweep_writes_csv_with_one_row_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bounds.cfg",
        "seed = 1\n[bounds]\ng_values = 1,2,5\nn_values = 10,20\n",
    );
    let out = tmp.path().join("o");
    let res = detform(&["--config", &cfg, "--out", out.to_str().unwrap(), "bounds"]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2, "header plus one row per (G, N)");
}

#[test]
fn help_exits_zero_and_bad_subcommand_exits_two() {
    assert_eq!(detform(&["--help"]).status.code(), Some(0));
    assert_eq!(detform(&["frobnicate"]).status.code(), Some(2));
}
