use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ionshuttle(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionshuttle"))
        .args(args)
        .current_dir(dir)
        .env_remove("IONSHUTTLE_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn modes_reports_two_ion_chain() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&ionshuttle(&["modes"], dir.path()));
    let ratios = v["omega_over_omega1"].as_array().unwrap();
    assert_eq!(ratios.len(), 2);
    assert!(ratios[0].as_f64().unwrap() < ratios[1].as_f64().unwrap());

    let v = json(&ionshuttle(&["modes", "--masses", "9.012,9.012", "--trap-mhz", "1"], dir.path()));
    let r: Vec<f64> = v["omega_over_omega1"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 3f64.sqrt()).abs() < 1e-12);
    assert!((v["omega1"].as_f64().unwrap() - 2e6 * std::f64::consts::PI).abs() < 1e-3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"schema_version": 2}"#).unwrap();
    assert_eq!(ionshuttle(&["modes", "--config", "bad.json"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("typo.json"), r#"{"schema_version": 1, "distanse_m": 1e-4}"#).unwrap();
    assert_eq!(ionshuttle(&["modes", "--config", "typo.json"], dir.path()).status.code(), Some(2));
    assert_eq!(ionshuttle(&["sweep", "--kind", "bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(ionshuttle(&["design", "--tf", "5,6"], dir.path()).status.code(), Some(2));
    // Far too short for the design to meet its end conditions.
    assert_eq!(ionshuttle(&["design", "--tf", "0.05"], dir.path()).status.code(), Some(3));
}

#[test]
fn sweep_csv_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let args = |workers: &'static str, out: &'static str| {
        [
            "sweep", "--preset", "fig1", "--tf", "2,3.5,5", "--kind", "nonic-analytic,cosine,linear-uncoupled",
            "--workers", workers, "--out", out,
        ]
    };
    assert!(ionshuttle(&args("1", "a.csv"), dir.path()).status.success());
    assert!(ionshuttle(&args("3", "b.csv"), dir.path()).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("kind,tf_s,n_mode_1,n_mode_2,total_quanta_omega1,design_residual,error")
    );
    let kinds: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(kinds.len(), 9);
    let mut sorted = kinds.clone();
    sorted.sort();
    assert_eq!(kinds, sorted);
}

#[test]
fn design_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ionshuttle(&["design", "--tf", "6", "--out", "design.json"], dir.path()).status.success());
    let direct = json(&ionshuttle(&["simulate", "--kind", "designed-nonic", "--tf", "6"], dir.path()));
    let reloaded = json(&ionshuttle(&["simulate", "--trajectory", "design.json"], dir.path()));
    assert_eq!(direct["excitation"], reloaded["excitation"]);
    assert_eq!(direct["uncoupled"], reloaded["uncoupled"]);
    let uncoupled = reloaded["uncoupled"]["total_quanta_omega1"].as_f64().unwrap();
    assert!(uncoupled < 1e-6);
}

#[test]
fn dense_dump_has_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionshuttle(
        &["simulate", "--kind", "cosine", "--tf", "3", "--dense", "dense.csv"],
        dir.path(),
    );
    json(&out);
    let text = fs::read_to_string(dir.path().join("dense.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q_1,q_2,p_1,p_2,Q0"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 10);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows.last().unwrap()[0] - 3e-6).abs() < 1e-18);
    assert!((rows.last().unwrap()[5] - 370e-6).abs() < 1e-15);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
}

#[test]
fn plot_script_references_dataset() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    let sweep = ionshuttle(
        &["sweep", "--tf", "2,4", "--kind", "linear", "--out", "data/ramp.csv"],
        dir.path(),
    );
    assert!(sweep.status.success());
    let out = ionshuttle(&["plot-script", "data/ramp.csv", "--out", "plot.py"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let script = fs::read_to_string(dir.path().join("plot.py")).unwrap();
    assert!(script.contains("data/ramp.csv"));
    assert!(script.contains("linear"));

    fs::write(dir.path().join("empty.csv"), "kind,tf_s,total_quanta_omega1\n").unwrap();
    let out = ionshuttle(&["plot-script", "empty.csv", "--out", "none.py"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("none.py").exists());
}

#[test]
fn optimize_sigma_and_scan_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&ionshuttle(&["optimize-sigma", "--tf", "5"], dir.path()));
    let sigma = v[0]["sigma"].as_f64().unwrap();
    assert!(sigma > 5e-8 && sigma < 2.5e-6);

    fs::write(
        dir.path().join("scan.json"),
        r#"{"schema_version": 1, "preset": "fig3", "omega_scan": {"min": 0.97, "max": 1.0, "count": 4}, "tf": {"values_s": [5e-6]}}"#,
    )
    .unwrap();
    let v = json(&ionshuttle(&["scan-omega", "--config", "scan.json"], dir.path()));
    assert_eq!(v["scores"].as_array().unwrap().len(), 4);
    assert!(v["best"].as_f64().unwrap() < 1.0);
}
