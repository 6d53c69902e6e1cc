//! Choosing the cut level `k`: cross-validation, the oracle equation, the
//! admissibility diagnostic, bias-removal schedules and theoretical rates.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curves::FunctionalSample;
use crate::error::{Error, Result};
use crate::estimator::Design;
use crate::operators::RegularizationScheme;
pub use crate::profiles::{EigenFamily, EigenProfile, SmoothnessFamily, SmoothnessProfile};

/// Finite-sample admissibility threshold on `(k ln k)² / n`.
pub const ADMISSIBILITY_RATIO: f64 = 0.1;

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub k: usize,
    /// `(k, mean squared L² prediction error)` for every evaluated `k`.
    pub curve: Vec<(usize, f64)>,
    /// Grid entries above the rank of some training fold.
    pub skipped: Vec<usize>,
}

impl CvResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,risk\n");
        for (k, r) in &self.curve {
            out.push_str(&format!("{k},{r:e}\n"));
        }
        out
    }
}

/// Fold index of each row: a seeded shuffle cut into contiguous blocks.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos * folds / n;
    }
    assignment
}

/// K-fold cross-validated choice of `k`. Ties go to the smallest `k`.
pub fn select_k_cv(
    x: &FunctionalSample,
    y: &FunctionalSample,
    k_grid: &[usize],
    folds: usize,
    seed: u64,
    scheme: RegularizationScheme,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::Domain(format!("folds must be at least 2, got {folds}")));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "sample sizes differ: {} inputs, {} outputs",
            x.len(),
            y.len()
        )));
    }
    if folds > x.len() {
        return Err(Error::Domain(format!(
            "{folds} folds need at least {folds} observations, got {}",
            x.len()
        )));
    }
    cv_risk_curve(x, y, k_grid, &fold_assignment(x.len(), folds, seed), scheme)
}

/// Cross-validation with an explicit fold assignment (row `i` goes to fold
/// `assignment[i]`).
pub fn cv_risk_curve(
    x: &FunctionalSample,
    y: &FunctionalSample,
    k_grid: &[usize],
    assignment: &[usize],
    scheme: RegularizationScheme,
) -> Result<CvResult> {
    let n = x.len();
    if y.len() != n || assignment.len() != n {
        return Err(Error::Dimension("sample sizes and fold assignment must agree".into()));
    }
    let mut ks: Vec<usize> = k_grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::Domain("k grid must be nonempty with positive entries".into()));
    }
    let folds = assignment.iter().max().map_or(0, |m| m + 1);
    let k_max = *ks.last().unwrap_or(&0);
    let mut members = vec![Vec::new(); folds];
    for (i, &f) in assignment.iter().enumerate() {
        members[f].push(i);
    }
    for (f, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::Domain(format!("fold {f} is empty")));
        }
        if n - rows.len() < k_max {
            return Err(Error::Precondition(format!(
                "training fold {f} has {} rows, fewer than the largest k = {k_max}",
                n - rows.len()
            )));
        }
    }

    let evaluate = |f: usize| -> Result<Vec<Option<f64>>> {
        let test = &members[f];
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let design = Design::new(&x.select(&train), &y.select(&train))?;
        let w = x.grid().weights();
        let mut xt = x.select(test).matrix().clone();
        for (p, mut col) in xt.column_iter_mut().enumerate() {
            col.add_scalar_mut(-design.mean_x().values()[p]);
            col *= w[p];
        }
        let yt = y.select(test).matrix().clone();
        let wy = y.grid().weights();
        ks.iter()
            .map(|&k| {
                if k > design.eigensystem().rank() {
                    return Ok(None);
                }
                let s = design.estimate(k, scheme)?;
                let mut err: DMatrix<f64> = &xt * s.kernel().transpose();
                for (q, mut col) in err.column_iter_mut().enumerate() {
                    col.add_scalar_mut(design.mean_y().values()[q]);
                }
                err -= &yt;
                let sse: f64 = err
                    .row_iter()
                    .map(|r| r.iter().zip(wy).map(|(e, w)| w * e * e).sum::<f64>())
                    .sum();
                Ok(Some(sse))
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let per_fold: Vec<Result<Vec<Option<f64>>>> = {
        use rayon::prelude::*;
        (0..folds).into_par_iter().map(evaluate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_fold: Vec<Result<Vec<Option<f64>>>> = (0..folds).map(evaluate).collect();

    let mut totals = vec![Some(0.0); ks.len()];
    for fold in per_fold {
        for (t, v) in totals.iter_mut().zip(fold?) {
            *t = match (*t, v) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
    }
    let mut curve = Vec::new();
    let mut skipped = Vec::new();
    for (&k, t) in ks.iter().zip(totals) {
        match t {
            Some(sse) => curve.push((k, sse / n as f64)),
            None => {
                warn!("k = {k} exceeds the rank of a training fold; skipped");
                skipped.push(k);
            }
        }
    }
    let best = curve
        .iter()
        .fold(None, |best: Option<(usize, f64)>, &(k, r)| match best {
            Some((_, br)) if br <= r => best,
            _ => Some((k, r)),
        })
        .ok_or_else(|| Error::Precondition("no k in the grid is below the training ranks".into()))?;
    Ok(CvResult {
        k: best.0,
        curve,
        skipped,
    })
}

/// Real root `x` of `(1/x) ∫_x^∞ φ = σ² / (n L²)`.
pub fn solve_oracle_equation(profile: &SmoothnessProfile, sigma2_eps: f64, n: u64) -> Result<f64> {
    profile.validate()?;
    if !(sigma2_eps.is_finite() && sigma2_eps > 0.0) {
        return Err(Error::Domain(format!("noise variance must be positive, got {sigma2_eps}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let target = sigma2_eps / (n as f64 * profile.l * profile.l);
    let lhs = |x: f64| profile.tail_integral(x) / x;
    let (mut lo, mut hi) = (1.0, 1.0);
    while lhs(lo) < target {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Numeric {
                message: "oracle equation root is below 1e-12".into(),
                residual: lhs(lo) - target,
            });
        }
    }
    while lhs(hi) >= target {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Numeric {
                message: "oracle equation root is beyond 1e15".into(),
                residual: lhs(hi) - target,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Integer part of the oracle root, at least 1.
pub fn optimal_k_oracle(profile: &SmoothnessProfile, sigma2_eps: f64, n: u64) -> Result<usize> {
    let x = solve_oracle_equation(profile, sigma2_eps, n)?;
    if x < 1.0 {
        warn!("oracle dimension {x:.3} is below 1 (n = {n} too small for the profile); using k = 1");
        return Ok(1);
    }
    // a root within solver tolerance of an integer counts as that integer
    Ok((x * (1.0 + 1e-9)).floor() as usize)
}

/// Whether a rate is an asymptotic equivalent or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Asymptotic,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub kind: RateKind,
}

/// Uniform prediction risk over `L₂(φ, L)` for the two closed-form families.
pub fn theoretical_rate(profile: &SmoothnessProfile, sigma2_eps: f64, n: u64) -> Result<Rate> {
    profile.validate()?;
    if !(sigma2_eps.is_finite() && sigma2_eps > 0.0) || n < 2 {
        return Err(Error::Domain("need sigma2 > 0 and n >= 2".into()));
    }
    let nf = n as f64;
    match &profile.family {
        SmoothnessFamily::Arithmetic { alpha, beta } => {
            let e = 2.0 + alpha;
            let c = profile.coefficient();
            let value = nf.ln().powf(beta / e)
                * nf.powf(-(1.0 + alpha) / e)
                * (c * profile.l * profile.l / (2.0 * sigma2_eps)).powf(1.0 / e);
            Ok(Rate {
                value,
                kind: RateKind::Asymptotic,
            })
        }
        SmoothnessFamily::Exponential { alpha } => Ok(Rate {
            value: nf.ln() / (alpha * nf),
            kind: RateKind::UpperBound,
        }),
        SmoothnessFamily::Explicit { .. } => Err(Error::Unsupported(
            "no closed-form rate for explicit profiles; estimate the risk by simulation".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `(k ln k)² / n`.
    pub ratio: f64,
}

/// Finite-sample version of `(k log k)² / n → 0`: admissible when the ratio
/// is at most [`ADMISSIBILITY_RATIO`].
pub fn admissible_k(k: usize, n: usize) -> Admissibility {
    let kf = k as f64;
    let ratio = (kf * kf.ln()).powi(2) / n.max(1) as f64;
    Admissibility {
        admissible: ratio <= ADMISSIBILITY_RATIO,
        ratio,
    }
}

/// `γ_k = sup_{j≥k} j ln j ‖S e_j‖ √λ_j`, scanned over `j ∈ [k, J]`.
///
/// `s_norms[j-1] = ‖S e_j‖`, `lambdas[j-1] = λ_j`; `J` must be at least `10k`
/// and the terms must be decreasing at the horizon.
pub fn gamma_k(s_norms: &[f64], lambdas: &[f64], k: usize) -> Result<f64> {
    if s_norms.len() != lambdas.len() {
        return Err(Error::Dimension("operator norms and eigenvalues differ in length".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    let horizon = s_norms.len();
    if horizon < 10 * k {
        return Err(Error::Precondition(format!(
            "horizon J = {horizon} is below 10k = {}",
            10 * k
        )));
    }
    let term = |j: usize| {
        let jf = j as f64;
        jf * jf.ln() * s_norms[j - 1] * lambdas[j - 1].max(0.0).sqrt()
    };
    let (last, before) = (term(horizon), term(horizon - 1));
    if last > 0.0 && last >= before {
        return Err(Error::Precondition(format!(
            "terms still rising at the horizon J = {horizon}; extend the profiles"
        )));
    }
    Ok((k..=horizon).map(term).fold(0.0, f64::max))
}

/// Largest `n` for which the bias term is negligible: `(k ln k)² / γ_k`.
pub fn bias_free_n(k: usize, gamma: f64) -> f64 {
    let kf = k as f64;
    let num = (kf * kf.ln()).powi(2);
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        num / gamma
    }
}
