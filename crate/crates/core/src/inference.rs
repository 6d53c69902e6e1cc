//! Asymptotic confidence intervals for functionals of the predicted curve.

use serde::Serialize;

use crate::curves::{ensure_same_grid, inner_product, Curve};
use crate::error::{Error, Result};
use crate::estimator::{predict, FittedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        (value - self.center).abs() <= self.half_width
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

fn half_width(model: &FittedModel, sigma2: f64, level: f64) -> f64 {
    let q = gaussian_quantile(0.5 + 0.5 * level).expect("level checked");
    (model.k() as f64 / model.n() as f64).sqrt() * sigma2.sqrt() * q
}

fn clamp_variance(v: f64) -> Result<f64> {
    if v < -1e-12 {
        return Err(Error::Numeric {
            message: "noise covariance quadratic form is negative".into(),
            residual: v,
        });
    }
    Ok(v.max(0.0))
}

/// `σ_m² = ∫∫ Γ̂_ε(s, t) m(s) m(t) ds dt`.
pub fn noise_quadratic_form(model: &FittedModel, m: &Curve) -> Result<f64> {
    ensure_same_grid(model.y_grid(), m.grid(), "noise quadratic form")?;
    let w = model.y_grid().weights();
    let wm: Vec<f64> = m.values().iter().zip(w).map(|(a, b)| a * b).collect();
    let wm = nalgebra::DVector::from_vec(wm);
    Ok((wm.transpose() * model.noise_covariance().kernel() * &wm)[(0, 0)])
}

/// Interval for `∫ Y_{n+1} m` centered at `∫ Ŷ_{n+1} m`.
pub fn ci_weighted_integral(
    model: &FittedModel,
    x_new: &Curve,
    m: &Curve,
    level: f64,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    ensure_same_grid(model.y_grid(), m.grid(), "weight function")?;
    let yhat = predict(model, x_new)?;
    let center = inner_product(&yhat, m)?;
    let sigma2 = clamp_variance(noise_quadratic_form(model, m)?)?;
    Ok(ConfidenceInterval {
        center,
        half_width: half_width(model, sigma2, level),
        level,
    })
}

/// Interval for `Y_{n+1}(t0)` with `σ_{t0}² = Γ̂_ε(t0, t0)`.
pub fn ci_pointwise(
    model: &FittedModel,
    x_new: &Curve,
    t0: f64,
    level: f64,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let grid = model.y_grid();
    let (p, frac) = grid.locate(t0)?;
    let yhat = predict(model, x_new)?;
    let center = yhat.eval(t0)?;
    let k = model.noise_covariance().kernel();
    let sigma2 = if frac == 0.0 {
        k[(p, p)]
    } else {
        let g = 1.0 - frac;
        g * g * k[(p, p)] + g * frac * (k[(p, p + 1)] + k[(p + 1, p)]) + frac * frac * k[(p + 1, p + 1)]
    };
    let sigma2 = clamp_variance(sigma2)?;
    Ok(ConfidenceInterval {
        center,
        half_width: half_width(model, sigma2, level),
        level,
    })
}

/// Inverse standard normal CDF by Acklam's rational approximation
/// (relative error below 1.2e-9).
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

/// Quantile for `p < 0.5`.
fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    x
}
