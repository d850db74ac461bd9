use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn capstruct(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capstruct"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = capstruct(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

#[test]
fn table1_reproduces_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["table1", "--case", "A", "--leverage", "50"], dir.path());
    let table = rows(&dir.path().join("table1.csv"));
    let row = table.iter().find(|r| r[0] == "4").expect("lambda = 4 row");
    let v: Vec<f64> = row[1..].iter().map(|s| s.parse().unwrap()).collect();
    assert!((v[0] / 53.1036 - 1.0).abs() < 1e-3);
    assert!((v[1] - 0.08892).abs() < 1e-3);
    assert!((v[2] / 51.9905 - 1.0).abs() < 1e-3);
    assert_eq!(table.last().unwrap()[0], "inf");
}

#[test]
fn barrier_residual_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["barrier", "--case", "B", "--lambda", "4", "--grid", "5"], dir.path());
    let m = manifest(dir.path());
    let vb = m["summary"]["v_b_star"].as_f64().unwrap();
    let res = m["summary"]["residual"].as_f64().unwrap();
    assert!(vb > 0.0 && res.abs() <= 1e-8, "{vb} {res}");
    let header = fs::read_to_string(dir.path().join("barrier.csv")).unwrap();
    assert!(header.starts_with("lambda,v_b_star,equity_at_barrier,classical_v_b\n"));
}

#[test]
fn barrier_below_optimum_breaks_limited_liability() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["value", "--case", "A", "--lambda", "4", "--vb-offset", "-0.3"], dir.path());
    let table = rows(&dir.path().join("value.csv"));
    assert!(table.iter().any(|r| r[4].parse::<f64>().unwrap() < 0.0));
    assert_eq!(manifest(dir.path())["summary"]["limited_liability_holds"], false);
}

#[test]
fn rerun_from_resolved_scenario_is_bit_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let scenario = first.path().join("input.json");
    fs::write(
        &scenario,
        r#"{"model": {"case": "B"}, "market": {"lambda": 6},
            "run": {"lambdas": [2, "inf"], "grid": 6, "n_paths": 2000, "maturities": [0.5, 5.0]}}"#,
    )
    .unwrap();
    let s = scenario.to_str().unwrap();
    for cmd in ["spreads", "simulate", "dist"] {
        ok(&[cmd, "--scenario", s, "--seed", "7"], first.path());
        let resolved = first.path().join("resolved_scenario.json");
        ok(&[cmd, "--scenario", resolved.to_str().unwrap()], second.path());
        for file in manifest(first.path())["outputs"].as_array().unwrap() {
            let name = file.as_str().unwrap();
            let a = fs::read(first.path().join(name)).unwrap();
            let b = fs::read(second.path().join(name)).unwrap();
            assert_eq!(a, b, "{cmd}: {name} differs");
        }
    }
}

#[test]
fn two_stage_writes_profile_and_optimum() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["two-stage", "--case", "A", "--grid", "11"], dir.path());
    let best = rows(&dir.path().join("two_stage_optimum.csv"));
    let p: Vec<f64> = best.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(p.len(), 8);
    assert!(p.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{p:?}");
}

#[test]
fn errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"market": {"kappa": "high"}}"#, "market.kappa"),
        (r#"{"market": {"kapa": 0.3}}"#, "market"),
        (r#"{"market": {"kappa": -1}}"#, "kappa"),
        (r#"{"run": {"leverage": 1.5}}"#, "run.leverage"),
        (r#"{"model": {"case": "custom"}}"#, "model.sigma"),
        (r#"{"market": {"v_t": "P/2"}}"#, "market.v_t"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let o = capstruct(&["barrier", "--scenario", path.to_str().unwrap()], &dir.path().join("out"));
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{text}: {err}");
    }
}

#[test]
fn custom_model_gets_drift_calibrated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("custom.json");
    fs::write(
        &path,
        r#"{"model": {"case": "custom", "sigma": 0.25, "gamma": 0.3, "phases": [{"p": 1.0, "beta": 4.0}]},
            "run": {"lambdas": [4], "grid": 3}}"#,
    )
    .unwrap();
    ok(&["barrier", "--scenario", path.to_str().unwrap()], dir.path());
    let vb = manifest(dir.path())["summary"]["v_b_star"].as_f64().unwrap();
    assert!(vb > 0.0);
}
