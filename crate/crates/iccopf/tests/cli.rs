mod common;

use std::path::Path;

use common::{check_containment, check_tradeoff, direction_path, scenario_path, sweep_spec_path};
use iccopf::cli::{self, EXIT_INPUT, EXIT_ITERATION_CAP, EXIT_MISMATCH, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("iccopf").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn failed(r: &Run, code: i32) {
    assert_eq!(r.code, code, "stderr: {}", r.stderr);
    assert!(r.stdout.is_empty(), "failure printed results: {}", r.stdout);
    assert!(!r.stderr.is_empty());
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

/// `(header, rows)` of a CSV body.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn parse_reports_counts() {
    let path = common::data_dir().join("case14.m");
    for arg in [p(&path), "case14"] {
        let r = run(&["parse", arg]);
        assert_eq!(r.code, EXIT_OK);
        let v = json(&r.stdout);
        assert_eq!((v["buses"].as_u64(), v["branches"].as_u64(), v["generators"].as_u64()), (Some(14), Some(20), Some(5)));
        assert_eq!(v["valid"], Value::Bool(true));
    }
}

#[test]
fn parse_missing_file() {
    failed(&run(&["parse", "/nonexistent/case.m"]), EXIT_INPUT);
}

#[test]
fn parse_corrupted_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.m");
    std::fs::write(&path, "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0;\n 2 1 x;\n];\n").unwrap();
    let r = run(&["parse", p(&path)]);
    failed(&r, EXIT_INPUT);
    assert!(r.stderr.contains("line"), "{}", r.stderr);
}

#[test]
fn unknown_flag_is_a_validation_error() {
    failed(&run(&["iccopf", "--scenario", "x.json", "--bogus"]), EXIT_VALIDATION);
}

#[test]
fn iccopf_on_case14() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let manifest = dir.path().join("manifest.json");
    let r = run(&[
        "iccopf",
        "--scenario",
        p(&scenario_path("case14")),
        "--direction",
        p(&direction_path("case14")),
        "--verify",
        "--trace",
        p(&trace),
        "--manifest",
        p(&manifest),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["termination"], "converged");
    let iterations = v["iterations"].as_u64().unwrap();
    assert!(iterations <= 50);
    let beta_max = v["beta_max"].as_f64().unwrap();
    let levels = &v["beta_levels_at_max"];
    assert!((levels["line:4-9"].as_f64().unwrap() - (0.95 + beta_max / 2f64.sqrt())).abs() < 1e-12);
    assert_eq!(v["verification"]["below_feasible"], true);
    assert_eq!(v["verification"]["above_infeasible"], true);
    let (header, rows) = csv_rows(&std::fs::read_to_string(&trace).unwrap());
    assert_eq!(header, ["iter", "beta", "snorm", "d_beta", "eta", "accepted"]);
    assert_eq!(rows.len() as u64, iterations);
    assert_eq!(num(&rows.last().unwrap()[1]), num(&format!("{:.11e}", beta_max)));
    let m = json(&std::fs::read_to_string(&manifest).unwrap());
    assert_eq!(m["seed"], 1);
    assert_eq!(m["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn iccopf_iteration_cap_exit_code() {
    let r = run(&[
        "iccopf",
        "--scenario",
        p(&scenario_path("case14")),
        "--direction",
        p(&direction_path("case14")),
        "--max-iter",
        "2",
    ]);
    assert_eq!(r.code, EXIT_ITERATION_CAP, "{}", r.stderr);
    assert_eq!(json(&r.stdout)["termination"], "iteration_cap");
}

#[test]
fn iccopf_feasible_to_the_cap() {
    let r = run(&[
        "iccopf",
        "--scenario",
        p(&scenario_path("case14")),
        "--direction",
        p(&direction_path("case14")),
        "--beta-cap",
        "0.96",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(json(&r.stdout)["termination"], "direction_feasible_at_cap");
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn degenerate_direction_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.json", r#"{"u": {"line:4-9": 0.0, "line:5-6": 0.0}, "beta0": 0.95}"#);
    failed(&run(&["iccopf", "--scenario", p(&scenario_path("case14")), "--direction", &d]), EXIT_VALIDATION);
    let d = write(dir.path(), "e.json", r#"{"u": {"line:99-100": 1.0}, "beta0": 0.95}"#);
    failed(&run(&["iccopf", "--scenario", p(&scenario_path("case14")), "--direction", &d]), EXIT_VALIDATION);
    let d = write(dir.path(), "f.json", r#"{"u": {"line:4-9": 1.0}, "beta0": 0.95, "extra": 1}"#);
    failed(&run(&["iccopf", "--scenario", p(&scenario_path("case14")), "--direction", &d]), EXIT_INPUT);
}

fn sensitivity(name: &str, beta: f64, step: Option<f64>) -> Run {
    let beta = beta.to_string();
    let mut args = vec![
        "sensitivity".to_owned(),
        "--scenario".into(),
        p(&scenario_path(name)).into(),
        "--direction".into(),
        p(&direction_path(name)).into(),
        "--beta".into(),
        beta,
    ];
    if let Some(h) = step {
        args.extend(["--fd-step".into(), h.to_string()]);
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

#[test]
fn sensitivity_interior_point() {
    let r = sensitivity("case14", 0.01, None);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["interior"], true);
    assert!(v["analytic"].as_f64().unwrap().abs() <= 1e-6);
    assert!(v["finite_difference"].as_f64().unwrap().abs() <= 1e-6);
    assert!(v["note"].as_str().unwrap().contains("interior"));
}

#[test]
fn sensitivity_agrees_past_the_case39_boundary() {
    let r = sensitivity("case39", 0.0677, None);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["interior"], false);
    assert!(v["relative_error"].as_f64().unwrap() <= 0.05);
}

#[test]
fn sensitivity_mismatch_exit_code() {
    // close to the cap the slack norm curves sharply and a 1e-3 stencil is too coarse
    let r = sensitivity("case39", 0.0695, Some(1e-3));
    failed(&r, EXIT_MISMATCH);
    assert!(r.stderr.contains('%'), "{}", r.stderr);
}

#[test]
fn sensitivity_step_out_of_domain() {
    failed(&sensitivity("case14", 0.07, Some(0.01)), EXIT_VALIDATION);
    failed(&sensitivity("case14", 0.2, None), EXIT_VALIDATION);
}

#[test]
fn sweep_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "w.json", r#"{"pair": ["line:4-9", "line:5-6"], "tau_grid": [], "beta0_list": [0.95]}"#);
    failed(&run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", &spec]), EXIT_VALIDATION);
    let spec = write(dir.path(), "v.json", r#"{"pair": ["line:4-9", "line:4-9"], "tau_grid": [1.0], "beta0_list": [0.95]}"#);
    failed(&run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", &spec]), EXIT_VALIDATION);
}

#[test]
fn sweep_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "w.json", r#"{"pair": ["line:4-9", "line:5-6"], "tau_grid": [0.5, 1.0, 2.0], "beta0_list": [0.95]}"#);
    let a = run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", &spec, "--workers", "1"]);
    let b = run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", &spec, "--workers", "3"]);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    let (header, rows) = csv_rows(&a.stdout);
    assert_eq!(header, cli::SWEEP_HEADER);
    assert_eq!(rows.len(), 3);
    failed(&run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", &spec, "--workers", "0"]), EXIT_VALIDATION);
}

#[test]
fn case14_sweep_traces_a_tradeoff() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let r = run(&["sweep", "--scenario", p(&scenario_path("case14")), "--spec", p(&sweep_spec_path("case14")), "--output", p(&out)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let (_, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 45);
    assert!(rows.iter().all(|r| r[6] == "converged"), "{rows:?}");
    let loaded = common::load("case14");
    let pair = [loaded.model.row_index("line:4-9").unwrap(), loaded.model.row_index("line:5-6").unwrap()];
    let groups: Vec<(f64, Vec<(f64, f64)>)> = [0.95, 0.96, 0.97]
        .iter()
        .map(|&b0| {
            let pts = rows.iter().filter(|r| num(&r[1]) == b0).map(|r| (num(&r[3]), num(&r[4]))).collect::<Vec<_>>();
            assert_eq!(pts.len(), 15);
            (b0, pts)
        })
        .collect();
    for (b0, pts) in &groups {
        check_tradeoff(pts).unwrap_or_else(|e| panic!("beta0 {b0}: {e}"));
    }
    for w in groups.windows(2) {
        check_containment(&loaded.model, pair, &w[0].1, w[0].0, &w[1].1).unwrap_or_else(|e| panic!("beta0 {}: {e}", w[1].0));
    }
}

fn curve(beta_min: f64, beta_max: f64, points: usize) -> Run {
    let (lo, hi, n) = (beta_min.to_string(), beta_max.to_string(), points.to_string());
    run(&[
        "curve",
        "--scenario",
        p(&scenario_path("case14")),
        "--direction",
        p(&direction_path("case14")),
        "--beta-min",
        &lo,
        "--beta-max",
        &hi,
        "--points",
        &n,
    ])
}

#[test]
fn curve_is_monotone_across_the_boundary() {
    let r = curve(0.0, 0.0707, 40);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let (header, rows) = csv_rows(&r.stdout);
    assert_eq!(header, ["beta", "snorm", "d_beta"]);
    assert_eq!(rows.len(), 40);
    let snorm: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    let d: Vec<f64> = rows.iter().map(|r| num(&r[2])).collect();
    assert!(snorm.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(d[0] <= 1e-6 && d[39] > 0.0);
    for (s, d) in snorm.iter().zip(&d) {
        if *s <= 1e-9 {
            assert!(*d <= 1e-6);
        }
    }
    assert_eq!(r.stdout, curve(0.0, 0.0707, 40).stdout);
}

#[test]
fn curve_below_the_boundary_is_slack_free() {
    let r = curve(0.0, 0.05, 6);
    let (_, rows) = csv_rows(&r.stdout);
    assert!(rows.iter().all(|r| num(&r[1]) <= 1e-6), "{rows:?}");
}

#[test]
fn curve_single_point() {
    let r = curve(0.03, 0.03, 1);
    assert_eq!(csv_rows(&r.stdout).1.len(), 1);
    failed(&curve(0.03, 0.03, 0), EXIT_VALIDATION);
    failed(&curve(0.05, 0.03, 3), EXIT_VALIDATION);
    failed(&curve(0.0, 0.2, 3), EXIT_VALIDATION);
}

#[test]
fn digest_is_deterministic() {
    let a = common::load("case14");
    let b = common::load("case14");
    assert_eq!(a.digest(&[b"x"]), b.digest(&[b"x"]));
    assert_ne!(a.digest(&[b"x"]), a.digest(&[b"y"]));
    assert_ne!(a.digest(&[]), common::load("case39").digest(&[]));
}
