use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernstein-lab")).args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn simons_seven_six_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "simons", "--n", "7", "--kappa", "6", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cone: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cone.json")).unwrap()).unwrap();
    assert_eq!(cone["stable"], true);
    assert_eq!(cone["oscillation"], false);
    for key in ["n", "kappa", "hardy_constant", "exponents", "oscillation", "form_min", "stable"] {
        assert!(cone.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn lawson_osserman_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lawson-osserman", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lo: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lawson_osserman.json")).unwrap()).unwrap();
    let k = lo["k_star"].as_f64().unwrap();
    assert!((k - 1.118_033_988_749_895).abs() < 1e-12);
    assert_eq!(lo["n_samples"], 100);
    assert!(lo["max_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn leaf_csv_starts_at_unit_height() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["leaf", "--s-max", "200", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("leaf.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,sigma,sigma_p,sigma_pp"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[..2], [0.0, 1.0]);
    let phase = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    assert!(phase.starts_with("t,x,y,in_region\n"));
    let svg = fs::read_to_string(dir.path().join("leaf.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn report_schema_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["slag", "--samples", "2000", "--identity-samples", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["experiment"], "slag");
    assert_eq!(r["config"]["samples"], "2000");
    assert_eq!(r["input_hash"].as_str().unwrap().len(), 64);
    for c in r["checks"].as_array().unwrap() {
        for key in ["name", "passed", "value", "tolerance"] {
            assert!(c.get(key).is_some());
        }
    }
    for a in r["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(a.as_str().unwrap()).exists(), "missing artifact {a}");
    }
    let w: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("witness.json")).unwrap()).unwrap();
    for key in ["theta", "n", "x", "z", "value", "seed"] {
        assert!(w.get(key).is_some());
    }
    assert!(w["value"].as_f64().unwrap() <= -0.5);
}

#[test]
fn reports_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = run(&["mss2d", "--nodes", "17", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for name in ["report.json", "mss2d.json", "mss2d.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# cone\nn = 5\nkappa = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["simons", "--config", cfg.to_str().unwrap(), "--kappa", "4", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out_dir);
    assert_eq!(r["config"]["n"], "5");
    assert_eq!(r["config"]["kappa"], "4");
    assert_eq!(check(&r, "certificate_margin")["passed"], true);
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["simons", "--kapa", "6", "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["simons", "--n", "seven", "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["simons", "--n"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "gamma = 1.9\nunknown = 3\n").unwrap();
    assert_eq!(run(&["simons", "--config", cfg.to_str().unwrap(), "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["mss2d", "--coeffs", "1,x", "--out", d]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // A density constant of zero cannot be met on a discrete grid.
    let out = run(&["mss2d", "--nodes", "17", "--density-constant", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(check(&r, "density_constancy")["passed"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("density_constancy"));
}

#[test]
fn help_lists_parameters() {
    let out = run(&["barrier", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--check-radius") && text.contains("--b-start"));
}
