//! Browser demo: three interactive views over the `funreg` simulation lab.
//!
//! Each view is a plain Rust function returning a JSON document, wrapped for
//! JavaScript with `wasm-bindgen`. The page in `www/` draws the documents.

use funreg::curves::{inner_product, Curve};
use funreg::estimator::predict;
use funreg::inference::ci_pointwise;
use funreg::operators::{apply, RegularizationScheme};
use funreg::profiles::{EigenProfile, SmoothnessFamily, SmoothnessProfile};
use funreg::selection::admissible_k;
use funreg::simlab::{
    mc_prediction_risk, replication_rng, Basis, GridSpec, InputSpec, NoiseSpec, OperatorSpec, Scenario,
    SelectionRule, STREAM_NEW, STREAM_NOISE, STREAM_X,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const POINTS: usize = 64;

fn scenario(operator: OperatorSpec, input: EigenProfile, noise: f64, n: usize, seed: u64) -> Scenario {
    Scenario {
        grid: GridSpec::Uniform(POINTS),
        input: InputSpec {
            profile: input,
            basis: Basis::Fourier,
            terms: None,
        },
        operator,
        noise: NoiseSpec {
            profile: EigenProfile::exponential(0.5, 0.0),
            variance: noise,
            basis: Basis::Sine,
            terms: None,
        },
        n,
        selection: SelectionRule::Oracle,
        scheme: RegularizationScheme::SpectralCut,
        seed,
        reps: 20,
    }
}

fn json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn err(e: funreg::Error) -> String {
    e.to_string()
}

#[derive(Debug, Serialize)]
struct FpcaView {
    grid: Vec<f64>,
    lambda_true: Vec<f64>,
    lambda_hat: Vec<f64>,
    /// Generator functions `e_j`.
    truth: Vec<Vec<f64>>,
    /// Empirical eigenfunctions, signs aligned with `truth`.
    estimate: Vec<Vec<f64>>,
}

/// Samples `n` curves with `λ_j = j^{-(1+decay)}` and compares the empirical
/// spectrum and leading eigenfunctions with the truth.
pub fn fpca_view(decay: f64, n: usize, components: usize, seed: u64) -> Result<String, String> {
    let sc = scenario(OperatorSpec::Zero, EigenProfile::arithmetic(decay, 0.0), 0.0, n, seed);
    let truth = sc.truth().map_err(err)?;
    let draw = truth
        .draw(n, &mut replication_rng(seed, 0, 0, STREAM_X), &mut replication_rng(seed, 0, 0, STREAM_NOISE))
        .map_err(err)?;
    let eig = truth.design(&draw).map_err(err)?.eigensystem().clone();
    let m = components.min(eig.rank()).min(truth.terms()).min(12);
    let mut est = Vec::with_capacity(m);
    let mut tru = Vec::with_capacity(m);
    for j in 0..m {
        let e = Curve::new(truth.grid.clone(), truth.basis.column(j).iter().copied().collect()).map_err(err)?;
        let mut h = eig.eigenfunction(j);
        if inner_product(&e, &h).map_err(err)? < 0.0 {
            h = h.scale(-1.0);
        }
        tru.push(e.into_values());
        est.push(h.into_values());
    }
    json(&FpcaView {
        grid: truth.grid.points().to_vec(),
        lambda_true: truth.lambdas.iter().take(m.max(1)).copied().collect(),
        lambda_hat: eig.eigenvalues().iter().take(m.max(1)).copied().collect(),
        truth: tru,
        estimate: est,
    })
}

#[derive(Debug, Serialize)]
struct RiskView {
    k: Vec<usize>,
    theory: Vec<f64>,
    variance: Vec<f64>,
    bias: Vec<f64>,
    monte_carlo: Vec<f64>,
    stderr: Vec<f64>,
    oracle_k: usize,
}

/// Prediction risk against `k` for the extremal operator of smoothness
/// `φ(j) ∝ j^{-(2+smoothness)}`: theory next to a small Monte Carlo run.
pub fn risk_view(smoothness: f64, noise: f64, n: usize, reps: usize, seed: u64) -> Result<String, String> {
    let phi = SmoothnessProfile::normalized(SmoothnessFamily::Arithmetic { alpha: smoothness, beta: 0.0 }, 1.0);
    let sc = scenario(
        OperatorSpec::Extremal { smoothness: phi },
        EigenProfile::arithmetic(0.5, 0.0),
        noise,
        n,
        seed,
    );
    let truth = sc.truth().map_err(err)?;
    let k_max = truth.terms().min(n.saturating_sub(1)).clamp(1, 24);
    let ks: Vec<usize> = (1..=k_max).collect();
    let report = mc_prediction_risk(&sc, reps.max(2), &ks, &[n]).map_err(err)?;
    let variance: Vec<f64> = ks.iter().map(|&k| truth.variance_term(k, n)).collect();
    let bias: Vec<f64> = ks.iter().map(|&k| truth.bias_term(k)).collect();
    let oracle_k = if noise > 0.0 { truth.oracle_k(n).map_err(err)? } else { k_max };
    json(&RiskView {
        theory: variance.iter().zip(&bias).map(|(v, b)| v + b).collect(),
        monte_carlo: report.cells.iter().map(|c| c.mean_risk).collect(),
        stderr: report.cells.iter().map(|c| c.stderr).collect(),
        k: ks,
        variance,
        bias,
        oracle_k,
    })
}

#[derive(Debug, Serialize)]
struct BandView {
    grid: Vec<f64>,
    x_new: Vec<f64>,
    /// Noise-free response `S x_new`.
    signal: Vec<f64>,
    prediction: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    sigma2_eps: f64,
    admissibility_ratio: f64,
    admissible: bool,
}

/// Fits `Ŝ` at cut level `k` on a simulated sample and returns the
/// prediction for a fresh input with its pointwise intervals.
pub fn band_view(n: usize, k: usize, noise: f64, level: f64, seed: u64) -> Result<String, String> {
    let sc = scenario(
        OperatorSpec::Diagonal {
            coefficients: vec![1.0, -0.7, 0.5, 0.3, -0.2],
        },
        EigenProfile::arithmetic(1.0, 0.0),
        noise,
        n,
        seed,
    );
    let truth = sc.truth().map_err(err)?;
    let draw = truth
        .draw(n, &mut replication_rng(seed, 0, 0, STREAM_X), &mut replication_rng(seed, 0, 0, STREAM_NOISE))
        .map_err(err)?;
    let model = funreg::estimator::fit(&draw.x, &draw.y, k, RegularizationScheme::SpectralCut).map_err(err)?;
    let (x_new, _) = truth.draw_new(&mut replication_rng(seed, 0, 0, STREAM_NEW)).map_err(err)?;
    let signal = apply(&truth.s, &x_new).map_err(err)?;
    let prediction = predict(&model, &x_new).map_err(err)?;
    let mut lo = Vec::with_capacity(POINTS);
    let mut hi = Vec::with_capacity(POINTS);
    for &t in truth.grid.points() {
        let ci = ci_pointwise(&model, &x_new, t, level).map_err(err)?;
        lo.push(ci.lo());
        hi.push(ci.hi());
    }
    let adm = admissible_k(k, n);
    json(&BandView {
        grid: truth.grid.points().to_vec(),
        x_new: x_new.into_values(),
        signal: signal.into_values(),
        prediction: prediction.into_values(),
        lo,
        hi,
        sigma2_eps: model.sigma2_eps(),
        admissibility_ratio: adm.ratio,
        admissible: adm.admissible,
    })
}

#[wasm_bindgen]
pub fn fpca_explorer(decay: f64, n: u32, components: u32, seed: u32) -> Result<String, JsValue> {
    fpca_view(decay, n as usize, components as usize, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn risk_curve(smoothness: f64, noise: f64, n: u32, reps: u32, seed: u32) -> Result<String, JsValue> {
    risk_view(smoothness, noise, n as usize, reps as usize, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn prediction_band(n: u32, k: u32, noise: f64, level: f64, seed: u32) -> Result<String, JsValue> {
    band_view(n as usize, k as usize, noise, level, seed.into()).map_err(|e| JsValue::from_str(&e))
}
