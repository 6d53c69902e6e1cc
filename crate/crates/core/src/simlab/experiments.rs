//! Monte Carlo experiments against a known truth.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, SelectionRule, Truth};
use crate::curves::{Curve, FunctionalSample};
use crate::error::{Error, Result};
use crate::estimator::Design;
use crate::inference::{ci_pointwise, ci_weighted_integral};
use crate::operators::RegularizationScheme;
use crate::selection::{admissible_k, bias_free_n, gamma_k, select_k_cv};

/// Purpose tags mixed into the per-replication stream id.
pub const STREAM_X: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_CV: u64 = 2;
pub const STREAM_NEW: u64 = 3;

/// Generator for replication `rep` of cell `cell`; a pure function of the
/// seed and the indices, whatever the evaluation order.
pub fn replication_rng(seed: u64, rep: usize, cell: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 24) | ((cell as u64) << 8) | purpose);
    rng
}

pub(crate) fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// One simulated training set plus its input scores.
#[derive(Debug, Clone)]
pub struct Draw {
    pub x: FunctionalSample,
    pub y: FunctionalSample,
}

impl Truth {
    fn scores<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let sd: Vec<f64> = self.lambdas.iter().map(|l| l.sqrt()).collect();
        DMatrix::from_fn(n, sd.len(), |_, j| {
            let z: f64 = rng.sample(StandardNormal);
            z * sd[j]
        })
    }

    /// `n` pairs `(X_i, S X_i + ε_i)`.
    pub fn draw(&self, n: usize, rng_x: &mut impl Rng, rng_noise: &mut impl Rng) -> Result<Draw> {
        let z = self.scores(n, rng_x);
        let x = &z * self.basis.transpose();
        let mut y = &z * self.s_on_basis.transpose();
        if !self.noise_lambdas.is_empty() {
            y += super::scenario::kl_draw(&self.noise_basis, &self.noise_lambdas, n, rng_noise);
        }
        Ok(Draw {
            x: FunctionalSample::from_matrix(self.grid.clone(), x)?,
            y: FunctionalSample::from_matrix(self.grid.clone(), y)?,
        })
    }

    /// A fresh input curve and its noiseless image `S X`.
    pub fn draw_new(&self, rng: &mut impl Rng) -> Result<(Curve, Curve)> {
        let z = self.scores(1, rng);
        let x = (&z * self.basis.transpose()).row(0).iter().copied().collect();
        let sx = (&z * self.s_on_basis.transpose()).row(0).iter().copied().collect();
        Ok((Curve::new(self.grid.clone(), x)?, Curve::new(self.grid.clone(), sx)?))
    }

    pub fn zero_curve(&self) -> Curve {
        Curve::zeros(self.grid.clone())
    }

    /// Design with the known zero population means.
    pub fn design(&self, draw: &Draw) -> Result<Design> {
        let zero = self.zero_curve();
        Design::with_known_means(&draw.x, &draw.y, &zero, &zero)
    }

    /// `E_X ‖(Ŝ − S) X‖² = Σ_j λ_j ‖(Ŝ − S) e_j‖²` for an estimated kernel.
    pub fn prediction_risk(&self, s_hat: &DMatrix<f64>) -> f64 {
        let w = self.grid.weights();
        let mut wb = self.basis.clone();
        for (p, mut row) in wb.row_iter_mut().enumerate() {
            row *= w[p];
        }
        let mut m = s_hat * wb - &self.s_on_basis;
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= self.lambdas[j].sqrt();
        }
        m.row_iter()
            .zip(w)
            .map(|(r, wq)| wq * r.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `‖Ŝ − S‖_HS`.
    pub fn estimation_error(&self, s_hat: &DMatrix<f64>) -> f64 {
        let w = self.grid.weights();
        let d = s_hat - self.s.kernel();
        let mut total = 0.0;
        for q in 0..d.nrows() {
            for p in 0..d.ncols() {
                total += w[q] * w[p] * d[(q, p)].powi(2);
            }
        }
        total.sqrt()
    }
}

/// How `k` is chosen inside an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    Oracle(usize),
    Cv,
}

impl KChoice {
    fn label(&self) -> String {
        match self {
            KChoice::Fixed(_) => "fixed".into(),
            KChoice::Oracle(_) => "oracle".into(),
            KChoice::Cv => "cv".into(),
        }
    }
}

fn rule_choice(rule: SelectionRule, truth: &Truth, n: usize) -> Result<KChoice> {
    Ok(match rule {
        SelectionRule::Fixed(k) => KChoice::Fixed(k),
        SelectionRule::Oracle => KChoice::Oracle(truth.oracle_k(n)?),
        SelectionRule::Cv { .. } => KChoice::Cv,
    })
}

/// Resolves `k` for one replication.
fn resolve_k(
    choice: KChoice,
    rule: SelectionRule,
    draw: &Draw,
    scheme: RegularizationScheme,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    match (choice, rule) {
        (KChoice::Fixed(k), _) | (KChoice::Oracle(k), _) => Ok(k),
        (KChoice::Cv, SelectionRule::Cv { folds, k_max }) => {
            let grid: Vec<usize> = (1..=k_max).collect();
            Ok(select_k_cv(&draw.x, &draw.y, &grid, folds, rng.random(), scheme)?.k)
        }
        (KChoice::Cv, _) => Err(Error::Precondition("cv choice without a cv rule".into())),
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// One `(n, k)` cell of a risk experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCell {
    pub n: usize,
    /// Cut level; for cross-validated cells the rounded mean of the chosen levels.
    pub k: usize,
    pub rule: String,
    pub reps: usize,
    /// Replications where `k` exceeded the empirical rank.
    pub failures: usize,
    pub flagged: bool,
    pub mean_risk: f64,
    pub stderr: f64,
    /// `σ_ε² k / n`.
    pub variance_term: f64,
    /// `Σ_{j>k} λ_j ‖S e_j‖²`.
    pub bias_term: f64,
    /// `‖S‖ k² λ_k / n` with `‖S‖` the Hilbert-Schmidt norm.
    pub a_order: f64,
    /// `k² ln k / n²`.
    pub b_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub seed: u64,
    pub reps: usize,
    pub cells: Vec<RiskCell>,
}

impl RiskReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,k,rule,reps,failures,flagged,mean_risk,stderr,variance_term,bias_term,a_order,b_order\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                c.n,
                c.k,
                c.rule,
                c.reps,
                c.failures,
                c.flagged,
                c.mean_risk,
                c.stderr,
                c.variance_term,
                c.bias_term,
                c.a_order,
                c.b_order
            ));
        }
        out
    }
}

/// Monte Carlo estimate of `E ‖Ŝ_n(X_{n+1}) − S(X_{n+1})‖²`.
///
/// The expectation over the new input is taken exactly given the fitted
/// kernel. With an empty `k_values` the scenario's selection rule is used.
pub fn mc_prediction_risk(
    scenario: &Scenario,
    reps: usize,
    k_values: &[usize],
    n_values: &[usize],
) -> Result<RiskReport> {
    let truth = scenario.truth()?;
    mc_prediction_risk_with(&truth, scenario, reps, k_values, n_values)
}

/// As [`mc_prediction_risk`] for an already built truth.
pub fn mc_prediction_risk_with(
    truth: &Truth,
    scenario: &Scenario,
    reps: usize,
    k_values: &[usize],
    n_values: &[usize],
) -> Result<RiskReport> {
    if reps < 2 {
        return Err(Error::Domain(format!("need at least 2 replications, got {reps}")));
    }
    if reps < 100 {
        warn!("{reps} replications; reported cells usually need at least 100");
    }
    if n_values.is_empty() || n_values.iter().any(|&n| n < 2) {
        return Err(Error::Domain("n values must be at least 2".into()));
    }
    if k_values.contains(&0) {
        return Err(Error::Domain("k values must be positive".into()));
    }
    let s_hs = truth.s_norms().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut cells = Vec::new();
    for (ni, &n) in n_values.iter().enumerate() {
        let choices: Vec<KChoice> = if k_values.is_empty() {
            vec![rule_choice(scenario.selection, truth, n)?]
        } else {
            k_values.iter().map(|&k| KChoice::Fixed(k)).collect()
        };
        let per_rep: Vec<Result<Vec<(usize, Option<f64>)>>> = par_map(reps, |r| {
            let draw = truth.draw(
                n,
                &mut replication_rng(scenario.seed, r, ni, STREAM_X),
                &mut replication_rng(scenario.seed, r, ni, STREAM_NOISE),
            )?;
            let design = match truth.design(&draw) {
                Ok(d) => d,
                Err(Error::RankZero) => return Ok(choices.iter().map(|_| (0, Some(0.0))).collect()),
                Err(e) => return Err(e),
            };
            let mut cv_rng = replication_rng(scenario.seed, r, ni, STREAM_CV);
            choices
                .iter()
                .map(|&c| {
                    let k = resolve_k(c, scenario.selection, &draw, scenario.scheme, &mut cv_rng)?;
                    if k > design.eigensystem().rank() {
                        return Ok((k, None));
                    }
                    let s_hat = design.estimate(k, scenario.scheme)?;
                    Ok((k, Some(truth.prediction_risk(s_hat.kernel()))))
                })
                .collect()
        });
        let per_rep: Vec<Vec<(usize, Option<f64>)>> = per_rep.into_iter().collect::<Result<_>>()?;
        for (ci, choice) in choices.iter().enumerate() {
            let risks: Vec<f64> = per_rep.iter().filter_map(|v| v[ci].1).collect();
            let failures = reps - risks.len();
            let k = match choice {
                KChoice::Fixed(k) | KChoice::Oracle(k) => *k,
                KChoice::Cv => {
                    let total: usize = per_rep.iter().map(|v| v[ci].0).sum();
                    ((total as f64 / reps as f64).round() as usize).max(1)
                }
            };
            let (mean_risk, stderr) = mean_and_stderr(&risks);
            let kf = k as f64;
            let nf = n as f64;
            let lambda_k = truth.lambdas.get(k - 1).copied().unwrap_or(0.0);
            if failures > 0 {
                warn!("cell n = {n}, k = {k}: {failures} replications had k above the empirical rank");
            }
            cells.push(RiskCell {
                n,
                k,
                rule: choice.label(),
                reps,
                failures,
                flagged: failures > 0,
                mean_risk,
                stderr,
                variance_term: truth.variance_term(k, n),
                bias_term: truth.bias_term(k),
                a_order: s_hs * kf * kf * lambda_k / nf,
                b_order: kf * kf * kf.ln() / (nf * nf),
            });
        }
    }
    Ok(RiskReport {
        seed: scenario.seed,
        reps,
        cells,
    })
}

/// Least-squares fit of `ln risk = intercept + slope · ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn rate_regression(n_values: &[f64], risks: &[f64]) -> Result<RateFit> {
    if n_values.len() != risks.len() {
        return Err(Error::Dimension("n values and risks differ in length".into()));
    }
    if n_values.len() < 4 {
        return Err(Error::Domain(format!(
            "rate regression needs at least 4 points, got {}",
            n_values.len()
        )));
    }
    if risks.iter().chain(n_values).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("risks and sample sizes must be positive".into()));
    }
    let xs: Vec<f64> = n_values.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = risks.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept, r2 })
}

/// Linear functional of the predicted curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// `f ↦ f(t0)`.
    Pointwise { t0: f64 },
    /// `f ↦ ∫ f m` with `m` the first input basis function.
    FirstEigenfunction,
    /// `f ↦ ∫ f m` with `m` given on the grid.
    Weight { values: Vec<f64> },
}

impl Functional {
    pub fn label(&self) -> String {
        match self {
            Functional::Pointwise { t0 } => format!("point:{t0}"),
            Functional::FirstEigenfunction => "integral:e1".into(),
            Functional::Weight { .. } => "integral:m".into(),
        }
    }

    fn weight(&self, truth: &Truth) -> Result<Option<Curve>> {
        match self {
            Functional::Pointwise { .. } => Ok(None),
            Functional::FirstEigenfunction => Ok(Some(Curve::new(
                truth.grid.clone(),
                truth.basis.column(0).iter().copied().collect(),
            )?)),
            Functional::Weight { values } => Ok(Some(Curve::new(truth.grid.clone(), values.clone())?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResult {
    pub functional: String,
    pub level: f64,
    pub coverage: f64,
    /// Binomial standard error `sqrt(c(1−c)/reps)`.
    pub stderr: f64,
    pub mean_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    /// `(k ln k)² / n`.
    pub admissibility_ratio: f64,
    pub admissible: bool,
    /// `γ_k` when the simulated horizon allows it.
    pub gamma_k: Option<f64>,
    pub bias_free_n: Option<f64>,
    pub results: Vec<CoverageResult>,
}

/// Empirical coverage of the asymptotic intervals for `F(S X_{n+1})`.
pub fn mc_coverage(
    scenario: &Scenario,
    functionals: &[Functional],
    levels: &[f64],
    reps: usize,
) -> Result<CoverageReport> {
    if reps < 2 {
        return Err(Error::Domain(format!("need at least 2 replications, got {reps}")));
    }
    if functionals.is_empty() || levels.is_empty() {
        return Err(Error::Domain("need at least one functional and one level".into()));
    }
    let truth = scenario.truth()?;
    let n = scenario.n;
    let choice = rule_choice(scenario.selection, &truth, n)?;
    let weights: Vec<Option<Curve>> = functionals
        .iter()
        .map(|f| f.weight(&truth))
        .collect::<Result<_>>()?;
    for f in functionals {
        if let Functional::Pointwise { t0 } = f {
            truth.grid.locate(*t0)?;
        }
    }

    // per replication: chosen k, then (covered, half width) per functional × level
    let per_rep: Vec<Result<(usize, Vec<(bool, f64)>)>> = par_map(reps, |r| {
        let draw = truth.draw(
            n,
            &mut replication_rng(scenario.seed, r, 0, STREAM_X),
            &mut replication_rng(scenario.seed, r, 0, STREAM_NOISE),
        )?;
        let design = truth.design(&draw)?;
        let mut cv_rng = replication_rng(scenario.seed, r, 0, STREAM_CV);
        let k = resolve_k(choice, scenario.selection, &draw, scenario.scheme, &mut cv_rng)?;
        let model = design.fit(k, scenario.scheme)?;
        let (x_new, sx_new) = truth.draw_new(&mut replication_rng(scenario.seed, r, 0, STREAM_NEW))?;
        let mut out = Vec::with_capacity(functionals.len() * levels.len());
        for (f, m) in functionals.iter().zip(&weights) {
            let target = match (f, m) {
                (Functional::Pointwise { t0 }, _) => sx_new.eval(*t0)?,
                (_, Some(m)) => crate::curves::inner_product(&sx_new, m)?,
                _ => unreachable!("integral functionals carry a weight"),
            };
            for &level in levels {
                let ci = match (f, m) {
                    (Functional::Pointwise { t0 }, _) => ci_pointwise(&model, &x_new, *t0, level)?,
                    (_, Some(m)) => ci_weighted_integral(&model, &x_new, m, level)?,
                    _ => unreachable!("integral functionals carry a weight"),
                };
                // roundoff slack so that exact, zero-width predictions count as covered
                let covered = (target - ci.center).abs() <= ci.half_width + 1e-10 * (1.0 + target.abs());
                out.push((covered, ci.half_width));
            }
        }
        Ok((k, out))
    });
    let per_rep: Vec<(usize, Vec<(bool, f64)>)> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut results = Vec::new();
    let mut idx = 0;
    for f in functionals {
        for &level in levels {
            let hits = per_rep.iter().filter(|(_, v)| v[idx].0).count();
            let width: f64 = per_rep.iter().map(|(_, v)| v[idx].1).sum::<f64>() / reps as f64;
            let c = hits as f64 / reps as f64;
            results.push(CoverageResult {
                functional: f.label(),
                level,
                coverage: c,
                stderr: (c * (1.0 - c) / reps as f64).sqrt(),
                mean_half_width: width,
            });
            idx += 1;
        }
    }
    let k_total: usize = per_rep.iter().map(|(k, _)| k).sum();
    let k = ((k_total as f64 / reps as f64).round() as usize).max(1);
    let adm = admissible_k(k, n);
    let gamma = gamma_k(&truth.s_norms(), &truth.lambdas, k).ok();
    Ok(CoverageReport {
        n,
        k,
        reps,
        seed: scenario.seed,
        admissibility_ratio: adm.ratio,
        admissible: adm.admissible,
        gamma_k: gamma,
        bias_free_n: gamma.map(|g| bias_free_n(k, g)),
        results,
    })
}

/// One row of the estimation-versus-prediction comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationVsPrediction {
    pub n: usize,
    pub k: usize,
    pub hs_error: f64,
    pub hs_stderr: f64,
    pub prediction_risk: f64,
    pub prediction_stderr: f64,
    /// Replications where `risk > λ₁ ‖Ŝ − S‖²_HS` (should be none).
    pub bound_violations: usize,
}

/// `‖Ŝ_n − S‖_HS` next to the prediction risk, across sample sizes.
pub fn mc_estimation_vs_prediction(
    scenario: &Scenario,
    n_values: &[usize],
    reps: usize,
) -> Result<Vec<EstimationVsPrediction>> {
    if reps < 2 {
        return Err(Error::Domain(format!("need at least 2 replications, got {reps}")));
    }
    let truth = scenario.truth()?;
    let lambda1 = truth.lambdas.first().copied().unwrap_or(0.0);
    let mut rows = Vec::new();
    for (ni, &n) in n_values.iter().enumerate() {
        let choice = rule_choice(scenario.selection, &truth, n)?;
        let per_rep: Vec<Result<(usize, f64, f64)>> = par_map(reps, |r| {
            let draw = truth.draw(
                n,
                &mut replication_rng(scenario.seed, r, ni, STREAM_X),
                &mut replication_rng(scenario.seed, r, ni, STREAM_NOISE),
            )?;
            let design = match truth.design(&draw) {
                Ok(d) => d,
                Err(Error::RankZero) => return Ok((1, 0.0, 0.0)),
                Err(e) => return Err(e),
            };
            let mut cv_rng = replication_rng(scenario.seed, r, ni, STREAM_CV);
            let k = resolve_k(choice, scenario.selection, &draw, scenario.scheme, &mut cv_rng)?
                .min(design.eigensystem().rank());
            let s_hat = design.estimate(k, scenario.scheme)?;
            Ok((
                k,
                truth.estimation_error(s_hat.kernel()),
                truth.prediction_risk(s_hat.kernel()),
            ))
        });
        let per_rep: Vec<(usize, f64, f64)> = per_rep.into_iter().collect::<Result<_>>()?;
        let hs: Vec<f64> = per_rep.iter().map(|v| v.1).collect();
        let risk: Vec<f64> = per_rep.iter().map(|v| v.2).collect();
        let violations = per_rep
            .iter()
            .filter(|(_, h, r)| *r > lambda1 * h * h * (1.0 + 1e-9) + 1e-300)
            .count();
        let (hs_error, hs_stderr) = mean_and_stderr(&hs);
        let (prediction_risk, prediction_stderr) = mean_and_stderr(&risk);
        let k_total: usize = per_rep.iter().map(|v| v.0).sum();
        rows.push(EstimationVsPrediction {
            n,
            k: ((k_total as f64 / reps as f64).round() as usize).max(1),
            hs_error,
            hs_stderr,
            prediction_risk,
            prediction_stderr,
            bound_violations: violations,
        });
    }
    Ok(rows)
}

/// Risk of the same cell on the scenario grid and on a grid of twice the size.
pub fn mc_grid_refinement(scenario: &Scenario, k: usize, reps: usize) -> Result<(RiskCell, RiskCell)> {
    let p = match scenario.grid {
        super::scenario::GridSpec::Uniform(p) => p,
        _ => {
            return Err(Error::Unsupported(
                "grid refinement needs a uniform grid specification".into(),
            ))
        }
    };
    let coarse = mc_prediction_risk(scenario, reps, &[k], &[scenario.n])?;
    let mut fine_scenario = scenario.clone();
    fine_scenario.grid = super::scenario::GridSpec::Uniform(2 * p);
    if fine_scenario.input.terms.is_none() {
        fine_scenario.input.terms = Some(coarse_terms(scenario)?);
    }
    let fine = mc_prediction_risk(&fine_scenario, reps, &[k], &[scenario.n])?;
    Ok((coarse.cells[0].clone(), fine.cells[0].clone()))
}

fn coarse_terms(scenario: &Scenario) -> Result<usize> {
    Ok(scenario.truth()?.terms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::EigenProfile;
    use crate::simlab::basis::Basis;
    use crate::simlab::scenario::{GridSpec, InputSpec, NoiseSpec, OperatorSpec};

    fn zero_scenario(variance: f64) -> Scenario {
        Scenario {
            grid: GridSpec::Uniform(32),
            input: InputSpec {
                profile: EigenProfile::arithmetic(1.0, 0.0),
                basis: Basis::Fourier,
                terms: None,
            },
            operator: OperatorSpec::Zero,
            noise: NoiseSpec {
                profile: EigenProfile::exponential(0.5, 0.0),
                variance,
                basis: Basis::Sine,
                terms: None,
            },
            n: 100,
            selection: SelectionRule::Fixed(3),
            scheme: RegularizationScheme::SpectralCut,
            seed: 5,
            reps: 20,
        }
    }

    #[test]
    fn noiseless_zero_operator_has_zero_risk() {
        let r = mc_prediction_risk(&zero_scenario(0.0), 10, &[2, 4], &[50]).unwrap();
        assert!(r.cells.iter().all(|c| c.mean_risk < 1e-12));
        let rows = mc_estimation_vs_prediction(&zero_scenario(0.0), &[30, 60], 5).unwrap();
        assert!(rows.iter().all(|r| r.hs_error < 1e-12 && r.prediction_risk < 1e-12));
    }

    #[test]
    fn rao_blackwellized_risk_matches_fresh_draws() {
        let s = zero_scenario(1.0);
        let truth = s.truth().unwrap();
        let mut rx = replication_rng(1, 0, 0, 0);
        let mut re = replication_rng(1, 0, 0, 1);
        let draw = truth.draw(60, &mut rx, &mut re).unwrap();
        let s_hat = truth.design(&draw).unwrap().estimate(4, s.scheme).unwrap();
        let exact = truth.prediction_risk(s_hat.kernel());
        let mut rng = replication_rng(2, 0, 0, 3);
        let m = 20_000;
        let mut total = 0.0;
        for _ in 0..m {
            let (x, sx) = truth.draw_new(&mut rng).unwrap();
            let pred = crate::operators::apply(&s_hat, &x).unwrap();
            total += crate::curves::norm(&pred.sub(&sx).unwrap()).powi(2);
        }
        let fresh = total / m as f64;
        assert!((fresh / exact - 1.0).abs() < 0.05, "{fresh} vs {exact}");
    }

    #[test]
    fn reports_are_deterministic() {
        let s = zero_scenario(1.0);
        let a = mc_prediction_risk(&s, 8, &[1, 3], &[40, 80]).unwrap();
        let b = mc_prediction_risk(&s, 8, &[1, 3], &[40, 80]).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let c = mc_prediction_risk(&Scenario { seed: 6, ..s }, 8, &[1, 3], &[40, 80]).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn rank_failures_are_flagged() {
        let r = mc_prediction_risk(&zero_scenario(1.0), 4, &[2, 9], &[5]).unwrap();
        assert!(!r.cells[0].flagged);
        assert!(r.cells[1].flagged && r.cells[1].failures == 4);
    }

    #[test]
    fn rate_regression_examples() {
        let ns = [100.0, 200.0, 400.0, 800.0, 1600.0];
        let exact: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-2.0 / 3.0)).collect();
        let fit = rate_regression(&ns, &exact).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let flat = rate_regression(&ns, &[0.5; 5]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(rate_regression(&ns, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(rate_regression(&ns[..3], &exact[..3]).is_err());
    }

    #[test]
    fn zero_noise_coverage_is_degenerate() {
        let mut s = zero_scenario(0.0);
        s.operator = OperatorSpec::Diagonal {
            coefficients: vec![1.0, 0.5],
        };
        s.selection = SelectionRule::Fixed(2);
        s.input.terms = Some(2);
        let report = mc_coverage(
            &s,
            &[Functional::Pointwise { t0: 0.5 }, Functional::FirstEigenfunction],
            &[0.95],
            20,
        )
        .unwrap();
        assert!(report.results.iter().all(|r| r.coverage == 1.0));
    }
}
