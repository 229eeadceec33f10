use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const OMEGA: f64 = 1.0e6;

fn qslopt(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_qslopt"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn two_level(extra: &str) -> String {
    format!("[model]\nkind = \"two_level\"\nomega_max_rad_per_s = {OMEGA:e}\n{extra}")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn optimize_two_level_reaches_target() {
    let dir = TempDir::new().unwrap();
    let t = 1.3 * std::f64::consts::PI / OMEGA;
    let cfg = two_level(&format!(
        "[grid]\nsegments = 40\nduration_s = {t:e}\n[seed]\nkind = \"random\"\nrng_seed = 5\n"
    ));
    let out = qslopt(dir.path(), &cfg, &["optimize"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert!(r["final_fidelity"].as_f64().unwrap() >= 0.9999);
    let controls = fs::read_to_string(dir.path().join("out/controls.csv")).unwrap();
    assert_eq!(controls.lines().count(), 41);
    assert!(controls.starts_with("dt_seconds,u0\n"));
}

#[test]
fn optimize_below_quantum_speed_limit_reports_stall() {
    let dir = TempDir::new().unwrap();
    let t = 0.5 * std::f64::consts::PI / OMEGA;
    let cfg = two_level(&format!("[grid]\nsegments = 10\nduration_s = {t:e}\n[seed]\nvalues = [0.5]\n"));
    let out = qslopt(dir.path(), &cfg, &["optimize"]);
    assert_eq!(out.status.code(), Some(4));
    let r = report(dir.path());
    assert_eq!(r["status"], "stalled-below-target");
    // Bang control is optimal below the limit: F = sin^2(pi/4).
    assert!((r["final_fidelity"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn malformed_config_names_key_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = two_level("[grid]\nsegments = 0\nduration_s = 1e-6\n");
    let out = qslopt(dir.path(), &cfg, &["optimize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.segments"));
    assert!(!dir.path().join("out").exists());

    let out = qslopt(dir.path(), &two_level("[grid]\nsegmets = 3\n"), &["optimize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("segmets"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_duration_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = qslopt(dir.path(), &two_level(""), &["optimize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.duration_s"));
}

#[test]
fn runs_are_byte_identical() {
    let t = 1.2 * std::f64::consts::PI / OMEGA;
    let cfg = two_level(&format!(
        "[grid]\nsegments = 20\nduration_s = {t:e}\n[seed]\nkind = \"random\"\nrng_seed = 11\n"
    ));
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(qslopt(a.path(), &cfg, &["optimize", "--threads", "1"]).status.code(), Some(0));
    assert_eq!(qslopt(b.path(), &cfg, &["optimize", "--threads", "2"]).status.code(), Some(0));
    for name in ["report.json", "controls.csv", "segments.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn evolve_matches_rabi_formula() {
    let dir = TempDir::new().unwrap();
    let t_max = 4.0 * std::f64::consts::PI / OMEGA;
    let cfg = two_level(&format!("[grid]\nt_max_s = {t_max:e}\nscan_points = 41\n"));
    let out = qslopt(dir.path(), &cfg, &["evolve"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let scan = fs::read_to_string(dir.path().join("out/scan.csv")).unwrap();
    let mut rows = 0;
    for line in scan.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (t, f, q) = (cols[0], cols[1], cols[2]);
        assert!((f - (OMEGA * t / 2.0).sin().powi(2)).abs() < 1e-12);
        if f > 1e-6 && f < 1.0 - 1e-6 {
            let sign = (OMEGA * t).sin().signum();
            assert!((q - sign * OMEGA / 2.0).abs() < 1e-6 * OMEGA);
        }
        rows += 1;
    }
    assert_eq!(rows, 41);
    let sections = fs::read_to_string(dir.path().join("out/sections.csv")).unwrap();
    assert_eq!(sections.lines().count(), 3);
}

#[test]
fn qsl_extrapolates_from_trace_file() {
    let dir = TempDir::new().unwrap();
    // Two-level optimum below the limit: F = sin^2(Omega T / 2), Q = Omega / 2.
    let mut trace = String::from("T_seconds,F_opt,Q_opt_rad_per_s,sigma_Q,class_id,slipped_from\n");
    for k in 1..=9 {
        let t = 0.3 * k as f64 / OMEGA;
        let f = (OMEGA * t / 2.0).sin().powi(2);
        trace.push_str(&format!("{t:e},{f:e},{:e},0,0,\n", OMEGA / 2.0));
    }
    fs::write(dir.path().join("trace.csv"), trace).unwrap();
    let cfg = two_level(&format!(
        "[tradeoff]\nf_from = 0.6\ntrace_file = \"{}\"\n",
        dir.path().join("trace.csv").display()
    ));
    let out = qslopt(dir.path(), &cfg, &["qsl"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/qsl.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let t_qsl: f64 = row[1].parse().unwrap();
    assert!((t_qsl - std::f64::consts::PI / OMEGA).abs() < 1e-9 / OMEGA);
}

#[test]
fn qsl_without_qualifying_sample_fails() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("trace.csv"),
        "T_seconds,F_opt,Q_opt_rad_per_s,sigma_Q,class_id,slipped_from\n1e-7,0.2,1e6,0,0,\n",
    )
    .unwrap();
    let cfg = two_level(&format!(
        "[tradeoff]\ntrace_file = \"{}\"\n",
        dir.path().join("trace.csv").display()
    ));
    let out = qslopt(dir.path(), &cfg, &["qsl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn redistribute_check_matches_first_order_prediction() {
    let dir = TempDir::new().unwrap();
    let t = 0.8 * std::f64::consts::PI / OMEGA;
    let cfg = two_level(&format!(
        "[grid]\nsegments = 16\nduration_s = {t:e}\n[seed]\nvalues = [0.7]\n[optimizer]\nsuccess_fidelity = 0.5\n"
    ));
    let out = qslopt(dir.path(), &cfg, &["redistribute-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/redistribute.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let eps: f64 = cols[1].parse().unwrap();
        let residual: f64 = cols[4].parse().unwrap();
        assert!(residual.abs() < 10.0 * eps * eps, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 8);
}
