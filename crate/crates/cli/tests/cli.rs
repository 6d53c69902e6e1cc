use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funreg::estimator::{fit, predict};
use funreg::inference::ci_weighted_integral;
use funreg::io::read_curves;
use funreg::operators::RegularizationScheme;
use funreg::profiles::EigenProfile;
use funreg::simlab::{Basis, GridSpec, InputSpec, NoiseSpec, OperatorSpec, Scenario, SelectionRule};
use serde_json::Value;

fn funreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funreg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = funreg(args);
    assert!(
        out.status.success(),
        "funreg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario_file(dir: &Path, n: usize) -> PathBuf {
    let sc = Scenario {
        grid: GridSpec::Uniform(33),
        input: InputSpec {
            profile: EigenProfile::arithmetic(1.0, 0.0),
            basis: Basis::Fourier,
            terms: None,
        },
        operator: OperatorSpec::Diagonal {
            coefficients: vec![1.0, 0.5, -0.25, 0.125],
        },
        noise: NoiseSpec {
            profile: EigenProfile::exponential(0.5, 0.0),
            variance: 0.5,
            basis: Basis::Sine,
            terms: None,
        },
        n,
        selection: SelectionRule::Fixed(4),
        scheme: RegularizationScheme::SpectralCut,
        seed: 0,
        reps: 20,
    };
    let path = dir.join("scenario.json");
    std::fs::write(&path, sc.to_json().unwrap()).unwrap();
    path
}

fn simulated(dir: &Path, n: usize, seed: &str) -> PathBuf {
    let sc = scenario_file(dir, n);
    let data = dir.join(format!("data-{seed}"));
    ok(&["simulate", "--scenario", s(&sc), "--seed", seed, "--out", s(&data)]);
    data
}

fn load(p: &Path) -> funreg::curves::FunctionalSample {
    read_curves(std::fs::File::open(p).unwrap()).unwrap()
}

fn same_at_12_digits(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300) || a == b
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulated(dir.path(), 50, "9");
    let b = simulated(dir.path(), 50, "9");
    let c = simulated(dir.path(), 50, "10");
    for f in ["x.csv", "y.csv", "kernel.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("x.csv")).unwrap(), std::fs::read(c.join("x.csv")).unwrap());
    assert_eq!(load(&a.join("x.csv")).len(), 50);
}

#[test]
fn fit_then_predict_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 120, "3");
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));
    let model = dir.path().join("model.json");
    let pred = dir.path().join("pred.csv");
    ok(&["fit", "--x", s(&x), "--y", s(&y), "--k", "4", "--out", s(&model)]);
    ok(&["predict", "--model", s(&model), "--x", s(&x), "--out", s(&pred)]);

    let (xs, ys) = (load(&x), load(&y));
    let lib = fit(&xs, &ys, 4, RegularizationScheme::SpectralCut).unwrap();
    let cli = load(&pred);
    assert_eq!(cli.len(), xs.len());
    for (i, row) in xs.rows().enumerate() {
        let expect = predict(&lib, &row).unwrap();
        for (a, b) in expect.values().iter().zip(cli.matrix().row(i).iter()) {
            assert!(same_at_12_digits(*a, *b), "row {i}: {a} vs {b}");
        }
    }
}

#[test]
fn pointwise_interval_half_width_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 200, "5");
    let model = dir.path().join("model.json");
    let pred = dir.path().join("pred.csv");
    ok(&["fit", "--x", s(&data.join("x.csv")), "--y", s(&data.join("y.csv")), "--k", "3", "--out", s(&model)]);
    let out = ok(&[
        "predict", "--model", s(&model), "--x", s(&data.join("x.csv")), "--out", s(&pred), "--ci-point", "0.5",
        "--level", "0.95",
    ]);
    let records: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(records.len(), 200);

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let grid: Vec<f64> = serde_json::from_value(doc["y_grid"].clone()).unwrap();
    let q = grid.iter().position(|&t| t == 0.5).unwrap();
    let sigma2 = doc["noise_kernel"][q][q].as_f64().unwrap();
    let (k, n) = (doc["k"].as_f64().unwrap(), doc["n"].as_f64().unwrap());
    let expected = (k / n).sqrt() * sigma2.sqrt() * 1.959964;
    let preds = load(&pred);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["functional"], "point:0.5");
        assert_eq!(r["level"], 0.95);
        let half = (r["hi"].as_f64().unwrap() - r["lo"].as_f64().unwrap()) / 2.0;
        assert!((half - expected).abs() < 1e-6, "{half} vs {expected}");
        assert!(same_at_12_digits(r["center"].as_f64().unwrap(), preds.matrix()[(i, q)]));
    }
}

#[test]
fn weighted_interval_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 80, "6");
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));
    let grid = load(&x).grid().clone();
    let weight: Vec<String> = grid.points().iter().map(|t| (t * t).to_string()).collect();
    let grid_row: Vec<String> = grid.points().iter().map(|t| t.to_string()).collect();
    let m_path = dir.path().join("m.csv");
    std::fs::write(&m_path, format!("{}\n{}\n", grid_row.join(","), weight.join(","))).unwrap();
    let model = dir.path().join("model.json");
    ok(&["fit", "--x", s(&x), "--y", s(&y), "--k", "2", "--out", s(&model)]);
    let out = ok(&[
        "predict", "--model", s(&model), "--x", s(&x), "--out", s(&dir.path().join("p.csv")), "--ci", s(&m_path),
        "--level", "0.9",
    ]);
    let records: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let (xs, ys) = (load(&x), load(&y));
    let lib = fit(&xs, &ys, 2, RegularizationScheme::SpectralCut).unwrap();
    let m = load(&m_path).row(0);
    for (r, row) in records.iter().zip(xs.rows()) {
        let ci = ci_weighted_integral(&lib, &row, &m, 0.9).unwrap();
        assert!(same_at_12_digits(r["center"].as_f64().unwrap(), ci.center));
        assert!(same_at_12_digits(r["lo"].as_f64().unwrap(), ci.lo()));
        assert_eq!(r["functional"], "integral:m");
    }
}

#[test]
fn validation_failures_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 30, "1");
    let model = dir.path().join("model.json");
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));

    let out = funreg(&["fit", "--x", s(&x), "--y", s(&y), "--k", "500", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!model.exists());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: --k:") && err.trim_end().lines().count() == 1, "{err}");
    assert!(out.stdout.is_empty());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,0.5,1\n1,two,3\n").unwrap();
    let out = funreg(&["fit", "--x", s(&bad), "--y", s(&y), "--k", "1", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--x"));
    assert!(!model.exists());

    let out = funreg(&["fit", "--x", s(&x), "--y", s(&y), "--k", "1", "--out", s(&dir.path().join("no/such/m.json"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = funreg(&["fit", "--x", s(&x), "--y", s(&y), "--cv", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));

    ok(&["fit", "--x", s(&x), "--y", s(&y), "--k", "2", "--out", s(&model)]);
    let pred = dir.path().join("p.csv");
    let out = funreg(&["predict", "--model", s(&model), "--x", s(&x), "--out", s(&pred), "--ci-point", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!pred.exists());
    let out = funreg(&["predict", "--model", s(&model), "--x", s(&x), "--out", s(&pred), "--ci-point", "0.5", "--level", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!pred.exists());
}

#[test]
fn cross_validated_fit_and_select_k_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 100, "8");
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));
    let curve = dir.path().join("cv.csv");
    let sel = ok(&["select-k", "--x", s(&x), "--y", s(&y), "--k-max", "8", "--seed", "2", "--out", s(&curve)]);
    let sel: Value = serde_json::from_slice(&sel.stdout).unwrap();
    let csv = std::fs::read_to_string(&curve).unwrap();
    assert!(csv.starts_with("k,risk\n"));
    assert_eq!(csv.lines().count(), 9);
    let model = dir.path().join("model.json");
    let f = ok(&["fit", "--x", s(&x), "--y", s(&y), "--cv", "--k-max", "8", "--seed", "2", "--out", s(&model)]);
    let f: Value = serde_json::from_slice(&f.stdout).unwrap();
    assert_eq!(f["k"], sel["k"]);
}

#[test]
fn monte_carlo_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path(), 60);
    let run = |cmd: &str, name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![cmd, "--scenario", s(&sc), "--seed", "11", "--reps", "12", "--out", s(&out)];
        args.extend_from_slice(extra);
        let stdout = ok(&args).stdout;
        (std::fs::read(&out).unwrap(), stdout)
    };
    let a = run("rates", "r1.csv", &["--n", "40,50,60,80", "--k", "2,3"]);
    let b = run("rates", "r2.csv", &["--n", "40,50,60,80", "--k", "2,3"]);
    assert_eq!(a, b);
    let fits: Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(fits["fits"].as_array().unwrap().len(), 2);
    assert_eq!(String::from_utf8(a.0).unwrap().lines().count(), 9);

    let a = run("coverage", "c1.json", &["--level", "0.9,0.95", "--t0", "0.25,0.5"]);
    let b = run("coverage", "c2.json", &["--level", "0.9,0.95", "--t0", "0.25,0.5"]);
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 6);
}
