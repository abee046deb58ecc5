//! End-to-end checks of the `xva` binary: artifact schemas, the exit-code
//! contract, and sweep determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xva"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("xva_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const EQUAL_RATES_DEFAULTS: &str = r#"{
  "rates": {"r_f_plus": 0.05, "r_f_minus": 0.05, "r_r_plus": 0.05, "r_r_minus": 0.05,
            "r_c_plus": 0.05, "r_c_minus": 0.05, "r_D": 0.05},
  "credit": {"L_I": 0.5, "L_C": 0.5, "h_I_Q": 0.15, "h_C_Q": 0.2},
  "equity": {"S0": 100.0, "mu": 0.05, "sigma": 0.2},
  "collateral": {"alpha": 0.25},
  "claim": {"kind": "call", "strike": 100.0, "maturity": 1.0},
  "grid": {"n_time": 60, "n_space": 120, "width_sigmas": 6.0, "picard_tol": 1e-10, "picard_max": 50},
  "mc": {"n_paths": 4000, "n_steps": 50, "seed": 9},
  "run": {"mode": "crosscheck"}
}"#;

#[test]
fn crosscheck_passes_and_writes_golden_headers() {
    let dir = temp_dir("crosscheck");
    let scenario = write_scenario(&dir, "scenario.json", EQUAL_RATES_DEFAULTS);
    let out = xva(&[
        "crosscheck",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let xva_csv = std::fs::read_to_string(dir.join("xva.csv")).unwrap();
    assert!(xva_csv
        .starts_with("t,S,engine,total,funding_leg,dva_leg,cva_leg,collateral_leg,factor,vhat"));
    let crosscheck = std::fs::read_to_string(dir.join("crosscheck.csv")).unwrap();
    assert!(crosscheck.starts_with("metric,engine_a,engine_b,value_a,value_b,delta,se,tol,pass"));
    assert!(!crosscheck.contains(",fail"));
    // fixed seeds: a repeated run reproduces the deltas byte for byte
    let out = xva(&[
        "crosscheck",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let again = std::fs::read_to_string(dir.join("crosscheck.csv")).unwrap();
    assert_eq!(crosscheck, again);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn interval_and_hedge_artifacts() {
    let dir = temp_dir("artifacts");
    let scenario = write_scenario(&dir, "scenario.json", EQUAL_RATES_DEFAULTS);
    let path = scenario.to_str().unwrap();
    let out_arg = dir.to_str().unwrap();

    let out = xva(&["interval", path, "--out", out_arg]);
    assert_eq!(out.status.code(), Some(0));
    let interval = std::fs::read_to_string(dir.join("interval.csv")).unwrap();
    assert!(interval.starts_with("V0_minus,V0_plus,width"));
    assert_eq!(interval.lines().count(), 2);

    let out = xva(&["hedge", path, "--out", out_arg]);
    assert_eq!(out.status.code(), Some(0));
    let hedge = std::fs::read_to_string(dir.join("hedge.csv")).unwrap();
    assert!(hedge.starts_with("t,S,xi_stock,xi_bond_I,xi_bond_C,psi_repo,xi_funding"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn validation_gate_and_force_flag() {
    // figure scenario: r_f above the repo borrow rate violates a rate check
    let scenario = scenario_dir().join("fig_defaults.json");
    let path = scenario.to_str().unwrap();
    let out = xva(&["validate", path]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("r_f_plus<=r_r_minus"), "{stderr}");

    let dir = temp_dir("force");
    // without --force the run is blocked with exit 2 and no artifacts
    let out = xva(&["price", path, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.join("xva.csv").exists());
    // a compliant scenario validates cleanly
    let ok = scenario_dir().join("equal_rates.json");
    let out = xva(&["validate", ok.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn forced_price_closed_form_runs_the_figure_scenario() {
    let dir = temp_dir("figure");
    let body = std::fs::read_to_string(scenario_dir().join("fig_defaults.json"))
        .unwrap()
        .replace("\"crosscheck\"", "\"closed_form\"");
    let scenario = write_scenario(&dir, "scenario.json", &body);
    let out = xva(&[
        "price",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--force",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let xva_csv = std::fs::read_to_string(dir.join("xva.csv")).unwrap();
    let row = xva_csv.lines().nth(1).unwrap();
    assert!(row.starts_with("0,100,closed_form,"));
    let total: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!(
        total < 0.0,
        "figure-scenario XVA should be negative at alpha=0.25, got {total}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn crosscheck_breach_exits_with_code_4() {
    // sabotage the lattice resolution so the solve disagrees with the
    // closed form beyond tolerance
    let dir = temp_dir("breach");
    let body = EQUAL_RATES_DEFAULTS.replace(
        "\"n_time\": 60, \"n_space\": 120, \"width_sigmas\": 6.0",
        "\"n_time\": 2, \"n_space\": 6, \"width_sigmas\": 1.5",
    );
    let scenario = write_scenario(&dir, "scenario.json", &body);
    let out = xva(&[
        "crosscheck",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let crosscheck = std::fs::read_to_string(dir.join("crosscheck.csv")).unwrap();
    assert!(crosscheck.contains(",fail"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn numerical_failure_exits_with_code_3() {
    let dir = temp_dir("numfail");
    let body = EQUAL_RATES_DEFAULTS.replace("\"picard_max\": 50", "\"picard_max\": 1");
    let scenario = write_scenario(&dir, "scenario.json", &body);
    let out = xva(&[
        "interval",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    assert!(!dir.join("interval.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bad_scenario_exits_with_code_2() {
    let dir = temp_dir("badjson");
    let scenario = write_scenario(&dir, "bad.json", "{\"rates\": {}}");
    let out = xva(&["price", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn sweep_rows_and_determinism() {
    let dir = temp_dir("sweep");
    let body = EQUAL_RATES_DEFAULTS.replace("\"crosscheck\"", "\"closed_form\"");
    let scenario = write_scenario(&dir, "scenario.json", &body);
    let args = [
        "sweep",
        scenario.to_str().unwrap(),
        "--axis",
        "r_f=0.05:0.10:0.005",
        "--axis",
        "alpha=0,0.5,1",
        "--out",
        dir.to_str().unwrap(),
        "--force",
    ];
    let out = xva(&args);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let first = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(first.starts_with("r_f,alpha,engine,total,"));
    assert_eq!(first.lines().count(), 34); // header + 11 * 3 points
    let out = xva(&args);
    assert_eq!(out.status.code(), Some(0));
    let second = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(first, second);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn schema_document_is_written() {
    let dir = temp_dir("schema");
    let out = xva(&["schema", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let schema = std::fs::read_to_string(dir.join("schema.md")).unwrap();
    assert!(schema.contains("continuous compounding"));
    assert!(schema.contains("`rates`"));
    let _ = std::fs::remove_dir_all(&dir);
}
