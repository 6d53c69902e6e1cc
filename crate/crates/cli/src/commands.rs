use std::fs::File;
use std::path::Path;

use funreg::curves::FunctionalSample;
use funreg::estimator::{fit, predict, FittedModel};
use funreg::inference::{ci_pointwise, ci_weighted_integral, ConfidenceInterval};
use funreg::io::{read_curves, write_curves, write_kernel};
use funreg::selection::select_k_cv;
use funreg::simlab::{
    mc_coverage, mc_prediction_risk, rate_regression, replication_rng, Functional, Scenario, STREAM_NOISE,
    STREAM_X,
};
use log::{info, warn};
use serde::Serialize;

use crate::args::{Command, CoverageArgs, FitArgs, PredictArgs, RatesArgs, SelectKArgs, SimulateArgs};
use crate::output::{check_writable, read_text, write_atomic, CliError, Context};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::SelectK(a) => select_k(a),
        Command::Rates(a) => rates(a),
        Command::Coverage(a) => coverage(a),
    }
}

fn emit(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::validation("stdout", e))?;
    println!("{text}");
    Ok(())
}

fn load_curves(field: &str, path: &Path) -> Result<FunctionalSample, CliError> {
    let file = File::open(path).map_err(|e| CliError::validation(field, format!("{}: {e}", path.display())))?;
    read_curves(file).field(field)
}

fn load_scenario(path: &Path, seed: u64) -> Result<Scenario, CliError> {
    let mut s = Scenario::from_json(&read_text("--scenario", path)?).field("--scenario")?;
    s.seed = seed;
    s.validate().field("--scenario")?;
    Ok(s)
}

fn to_bytes(field: &str, f: impl FnOnce(&mut Vec<u8>) -> funreg::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).field(field)?;
    Ok(buf)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    if a.out.exists() && !a.out.is_dir() {
        return Err(CliError::validation("--out", format!("{} is not a directory", a.out.display())));
    }
    let scenario = load_scenario(&a.scenario, a.seed)?;
    let truth = scenario.truth().field("--scenario")?;
    let draw = truth
        .draw(
            scenario.n,
            &mut replication_rng(a.seed, 0, 0, STREAM_X),
            &mut replication_rng(a.seed, 0, 0, STREAM_NOISE),
        )
        .field("--scenario")?;
    let files = [
        ("x.csv", to_bytes("--out", |b| write_curves(b, &draw.x))?),
        ("y.csv", to_bytes("--out", |b| write_curves(b, &draw.y))?),
        ("kernel.csv", to_bytes("--out", |b| write_kernel(b, &truth.s))?),
    ];
    std::fs::create_dir_all(&a.out).field("--out")?;
    for (name, bytes) in &files {
        write_atomic("--out", &a.out.join(name), bytes)?;
    }
    info!("wrote {} curves to {}", scenario.n, a.out.display());
    emit(&serde_json::json!({
        "n": scenario.n,
        "terms": truth.terms(),
        "sigma2_eps": truth.sigma2_eps(),
        "tail_fraction": truth.tail_fraction,
        "files": files.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
    }))
}

fn fit_cmd(a: FitArgs) -> Result<(), CliError> {
    check_writable("--out", &a.out)?;
    let x = load_curves("--x", &a.x)?;
    let y = load_curves("--y", &a.y)?;
    let (k, cv) = match a.k {
        Some(k) => (k, None),
        None => {
            let seed = a.seed.ok_or_else(|| CliError::validation("--seed", "required with --cv"))?;
            if a.k_max == 0 {
                return Err(CliError::validation("--k-max", "must be positive"));
            }
            let grid: Vec<usize> = (1..=a.k_max).collect();
            let cv = select_k_cv(&x, &y, &grid, a.folds, seed, a.scheme).field("--cv")?;
            (cv.k, Some(cv))
        }
    };
    let model = fit(&x, &y, k, a.scheme).field("--k")?;
    write_atomic("--out", &a.out, model.to_json().field("--out")?.as_bytes())?;
    emit(&serde_json::json!({
        "k": model.k(),
        "n": model.n(),
        "scheme": model.scheme().to_string(),
        "sigma2_eps": model.sigma2_eps(),
        "cv": cv,
    }))
}

/// Interval record written to stdout.
#[derive(Debug, Serialize)]
struct IntervalRecord {
    functional: String,
    center: f64,
    lo: f64,
    hi: f64,
    level: f64,
}

impl IntervalRecord {
    fn new(functional: String, ci: ConfidenceInterval) -> Self {
        IntervalRecord {
            functional,
            center: ci.center,
            lo: ci.lo(),
            hi: ci.hi(),
            level: ci.level,
        }
    }
}

fn predict_cmd(a: PredictArgs) -> Result<(), CliError> {
    check_writable("--out", &a.out)?;
    let model = FittedModel::from_json(&read_text("--model", &a.model)?).field("--model")?;
    let x = load_curves("--x", &a.x)?;
    let weight = match &a.ci {
        Some(path) => {
            let m = load_curves("--ci", path)?;
            if m.len() != 1 {
                return Err(CliError::validation("--ci", format!("expected one weight curve, found {}", m.len())));
            }
            Some(m.row(0))
        }
        None => None,
    };
    let mut predictions = Vec::with_capacity(x.len());
    let mut intervals = Vec::new();
    for (i, row) in x.rows().enumerate() {
        let field = format!("--x row {}", i + 1);
        predictions.push(predict(&model, &row).field(&field)?);
        if let Some(m) = &weight {
            let ci = ci_weighted_integral(&model, &row, m, a.level).field("--ci")?;
            intervals.push(IntervalRecord::new("integral:m".into(), ci));
        }
        if let Some(t0) = a.ci_point {
            let ci = ci_pointwise(&model, &row, t0, a.level).field("--ci-point")?;
            intervals.push(IntervalRecord::new(format!("point:{t0}"), ci));
        }
    }
    let sample = FunctionalSample::from_curves(model.y_grid().clone(), &predictions).field("--out")?;
    let bytes = to_bytes("--out", |b| write_curves(b, &sample))?;
    write_atomic("--out", &a.out, &bytes)?;
    if weight.is_some() || a.ci_point.is_some() {
        emit(&intervals)?;
    }
    Ok(())
}

fn select_k(a: SelectKArgs) -> Result<(), CliError> {
    if let Some(out) = &a.out {
        check_writable("--out", out)?;
    }
    let x = load_curves("--x", &a.x)?;
    let y = load_curves("--y", &a.y)?;
    let grid = if a.k_grid.is_empty() {
        (1..=a.k_max).collect()
    } else {
        a.k_grid.clone()
    };
    let cv = select_k_cv(&x, &y, &grid, a.folds, a.seed, a.scheme).field("--k-grid")?;
    if let Some(out) = &a.out {
        write_atomic("--out", out, cv.to_csv().as_bytes())?;
    }
    emit(&serde_json::json!({ "k": cv.k, "skipped": cv.skipped, "curve": cv.curve }))
}

#[derive(Debug, Serialize)]
struct RateSummary {
    rule: String,
    k: Option<usize>,
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn rates(a: RatesArgs) -> Result<(), CliError> {
    check_writable("--out", &a.out)?;
    let scenario = load_scenario(&a.scenario, a.seed)?;
    let n_values = if a.n_values.is_empty() {
        vec![scenario.n]
    } else {
        a.n_values.clone()
    };
    let reps = a.reps.unwrap_or(scenario.reps);
    let report = mc_prediction_risk(&scenario, reps, &a.k_values, &n_values).field("--scenario")?;
    write_atomic("--out", &a.out, report.to_csv().as_bytes())?;
    let groups = report.cells.len() / n_values.len();
    let mut fits = Vec::new();
    if n_values.len() >= 4 {
        for g in 0..groups {
            let cells: Vec<_> = report.cells.iter().skip(g).step_by(groups).collect();
            let ns: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();
            let risks: Vec<f64> = cells.iter().map(|c| c.mean_risk).collect();
            match rate_regression(&ns, &risks) {
                Ok(f) => fits.push(RateSummary {
                    rule: cells[0].rule.clone(),
                    k: a.k_values.get(g).copied(),
                    slope: f.slope,
                    intercept: f.intercept,
                    r2: f.r2,
                }),
                Err(e) => warn!("no rate fit for group {g}: {e}"),
            }
        }
    }
    emit(&serde_json::json!({ "seed": report.seed, "reps": report.reps, "fits": fits }))
}

fn coverage(a: CoverageArgs) -> Result<(), CliError> {
    check_writable("--out", &a.out)?;
    let scenario = load_scenario(&a.scenario, a.seed)?;
    let reps = a.reps.unwrap_or(scenario.reps);
    let mut functionals: Vec<Functional> = a.t0.iter().map(|&t0| Functional::Pointwise { t0 }).collect();
    functionals.push(Functional::FirstEigenfunction);
    let report = mc_coverage(&scenario, &functionals, &a.level, reps).field("--scenario")?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::validation("--out", e))?;
    write_atomic("--out", &a.out, format!("{text}\n").as_bytes())?;
    emit(&report)
}
