//! Decay profiles for eigenvalue sequences `λ_j` and smoothness weights `φ(j)`.
//!
//! Both are positive decreasing functions on `[1, ∞)`. Built-in families have
//! an analytic continuation to real arguments, which the oracle equation and
//! the tail sums integrate over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terms summed explicitly before the Euler-Maclaurin remainder takes over.
const DIRECT_SUM_TERMS: usize = 4096;

/// Shape of a decreasing sequence.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Decay {
    /// `s^{-p} (1 + ln s)^{-β}` for `s ≥ 1`, `s^{-p}` below 1.
    PowerLog { p: f64, beta: f64 },
    /// `s^{-g} e^{-a s}`.
    ExpPower { a: f64, g: f64 },
    /// Linear interpolation of the listed values, zero past the last one.
    Explicit(Vec<f64>),
}

impl Decay {
    pub(crate) fn value(&self, s: f64) -> f64 {
        match self {
            Decay::PowerLog { p, beta } => {
                let log_factor = if *beta == 0.0 {
                    1.0
                } else {
                    (1.0 + s.max(1.0).ln()).powf(-beta)
                };
                s.powf(-p) * log_factor
            }
            Decay::ExpPower { a, g } => s.powf(-g) * (-a * s).exp(),
            Decay::Explicit(v) => {
                if s <= 1.0 {
                    v[0]
                } else if s >= v.len() as f64 {
                    if s == v.len() as f64 {
                        v[v.len() - 1]
                    } else {
                        0.0
                    }
                } else {
                    let i = s.floor() as usize;
                    let frac = s - i as f64;
                    v[i - 1] * (1.0 - frac) + v[i] * frac
                }
            }
        }
    }

    /// `∫_x^∞ f(s) ds` for `x > 0`.
    pub(crate) fn tail_integral(&self, x: f64) -> f64 {
        match self {
            Decay::PowerLog { p, beta } => {
                if x < 1.0 {
                    let head = if *p == 1.0 {
                        -x.ln()
                    } else {
                        (x.powf(1.0 - p) - 1.0) / (p - 1.0)
                    };
                    return head + self.tail_integral(1.0);
                }
                let l = 1.0 + x.ln();
                if *beta == 0.0 {
                    x.powf(1.0 - p) / (p - 1.0)
                } else if *p == 1.0 {
                    l.powf(1.0 - beta) / (beta - 1.0)
                } else {
                    // s = x e^{u/(p-1)} turns the integrand into e^{-u} times a slowly varying factor
                    let q = p - 1.0;
                    let body = integrate_to_infinity(|u| (-u).exp() * (l + u / q).powf(-beta));
                    x.powf(-q) / q * body
                }
            }
            Decay::ExpPower { a, g } => {
                let head = if x < 1.0 {
                    adaptive_simpson(&|s| self.value(s), x, 1.0, 1e-14)
                } else {
                    0.0
                };
                let x0 = x.max(1.0);
                let tail = if *g == 0.0 {
                    (-a * x0).exp() / a
                } else {
                    // s = x0 + u/a
                    (-a * x0).exp() / a
                        * integrate_to_infinity(|u| (x0 + u / a).powf(-g) * (-u).exp())
                };
                head + tail
            }
            Decay::Explicit(v) => {
                let j_max = v.len() as f64;
                if x >= j_max {
                    return 0.0;
                }
                let mut total = 0.0;
                let mut lo = x;
                if lo < 1.0 {
                    total += (1.0 - lo) * v[0];
                    lo = 1.0;
                }
                while lo < j_max {
                    let hi = (lo.floor() + 1.0).min(j_max);
                    total += 0.5 * (hi - lo) * (self.value(lo) + self.value(hi));
                    lo = hi;
                }
                total
            }
        }
    }

    /// `Σ_{j>k} f(j)`.
    pub(crate) fn tail_sum(&self, k: usize) -> f64 {
        if let Decay::Explicit(v) = self {
            return v.iter().skip(k).sum();
        }
        let m = k + 1 + DIRECT_SUM_TERMS;
        let head: f64 = ((k + 1)..m).map(|j| self.value(j as f64)).sum();
        let mf = m as f64;
        let h = 1e-3 * mf;
        let derivative = (self.value(mf + h) - self.value(mf - h)) / (2.0 * h);
        head + self.tail_integral(mf) + 0.5 * self.value(mf) - derivative / 12.0
    }

    pub(crate) fn total(&self) -> f64 {
        self.value(1.0) + self.tail_sum(1)
    }
}

/// Integral of `f` over `[0, ∞)` for integrands decaying at least like `e^{-u}`.
///
/// Unit chunks are added until the running total stops changing at the
/// `1e-12` relative level.
pub(crate) fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut total = 0.0;
    let mut quiet = 0;
    for chunk in 0..10_000 {
        let a = chunk as f64;
        let piece = adaptive_simpson(&f, a, a + 1.0, 1e-15);
        let previous = total;
        total += piece;
        if (total - previous).abs() <= 1e-12 * total.abs() {
            quiet += 1;
            if quiet == 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total
}

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

fn check_explicit(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain(format!("{what}: explicit list is empty")));
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Domain(format!("{what}: values must be positive and finite")));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Domain(format!("{what}: values must be nonincreasing")));
    }
    Ok(())
}

fn one() -> f64 {
    1.0
}

/// Family of an eigenvalue sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EigenFamily {
    /// `j^{-1-α} (1 + ln j)^{-β}`; pure power when `β = 0`.
    Arithmetic {
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
    /// `j^{-γ} e^{-α j}`.
    Exponential {
        alpha: f64,
        #[serde(default)]
        gamma: f64,
    },
    Explicit { values: Vec<f64> },
}

/// Eigenvalue sequence `λ_j = scale · family(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProfile {
    #[serde(flatten)]
    pub family: EigenFamily,
    #[serde(default = "one")]
    pub scale: f64,
}

impl EigenProfile {
    pub fn arithmetic(alpha: f64, beta: f64) -> Self {
        EigenProfile {
            family: EigenFamily::Arithmetic { alpha, beta },
            scale: 1.0,
        }
    }

    pub fn exponential(alpha: f64, gamma: f64) -> Self {
        EigenProfile {
            family: EigenFamily::Exponential { alpha, gamma },
            scale: 1.0,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        EigenProfile {
            family: EigenFamily::Explicit { values },
            scale: 1.0,
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Domain(format!("eigen profile scale must be positive, got {}", self.scale)));
        }
        match &self.family {
            EigenFamily::Arithmetic { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite()) || *alpha < 0.0 {
                    return Err(Error::Domain(format!("arithmetic profile needs alpha >= 0, got {alpha}")));
                }
                if *alpha == 0.0 && *beta <= 1.0 {
                    return Err(Error::Domain(
                        "arithmetic profile with alpha = 0 needs beta > 1 to be summable".into(),
                    ));
                }
                if *beta < 0.0 {
                    return Err(Error::Domain(format!("arithmetic profile needs beta >= 0, got {beta}")));
                }
            }
            EigenFamily::Exponential { alpha, gamma } => {
                if !(alpha.is_finite() && *alpha > 0.0) || !gamma.is_finite() || *gamma < 0.0 {
                    return Err(Error::Domain(
                        "exponential profile needs alpha > 0 and gamma >= 0".into(),
                    ));
                }
            }
            EigenFamily::Explicit { values } => check_explicit(values, "eigen profile")?,
        }
        Ok(())
    }

    pub(crate) fn decay(&self) -> Decay {
        match &self.family {
            EigenFamily::Arithmetic { alpha, beta } => Decay::PowerLog { p: 1.0 + alpha, beta: *beta },
            EigenFamily::Exponential { alpha, gamma } => Decay::ExpPower { a: *alpha, g: *gamma },
            EigenFamily::Explicit { values } => Decay::Explicit(values.clone()),
        }
    }

    /// `λ_j` for real `j ≥ 1`.
    pub fn lambda(&self, j: f64) -> f64 {
        self.scale * self.decay().value(j)
    }

    /// `λ_1, …, λ_J`.
    pub fn values(&self, count: usize) -> Vec<f64> {
        let d = self.decay();
        (1..=count).map(|j| self.scale * d.value(j as f64)).collect()
    }

    /// `Σ_j λ_j`.
    pub fn total(&self) -> f64 {
        self.scale * self.decay().total()
    }

    /// `Σ_{j>J} λ_j / Σ_j λ_j`.
    pub fn tail_fraction(&self, count: usize) -> f64 {
        let d = self.decay();
        d.tail_sum(count) / d.total()
    }

    /// Length of an explicit list, if any.
    pub fn explicit_len(&self) -> Option<usize> {
        match &self.family {
            EigenFamily::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// Smallest `J ≤ cap` whose relative tail mass is below `tol`, or `cap`.
    pub fn truncation(&self, tol: f64, cap: usize) -> usize {
        let cap = self.explicit_len().map_or(cap, |len| len.min(cap));
        (1..=cap)
            .find(|&j| self.tail_fraction(j) < tol)
            .unwrap_or(cap)
    }

    /// First index `j` (1-based, interior) where the second difference of
    /// `λ` is below `-1e-12`, scanning `j ∈ [2, J-1]`.
    pub fn convexity_violation(&self, count: usize) -> Option<usize> {
        let v = self.values(count);
        (1..count.saturating_sub(1))
            .find(|&i| v[i - 1] - 2.0 * v[i] + v[i + 1] < -1e-12)
            .map(|i| i + 1)
    }
}

/// Family of the smoothness weights `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothnessFamily {
    /// `φ_a(j) ∝ j^{-(2+α)} (1 + ln j)^{-β}`.
    Arithmetic {
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
    /// `φ_b(j) ∝ e^{-α j}`.
    Exponential { alpha: f64 },
    Explicit { values: Vec<f64> },
}

/// Smoothness class `L₂(φ, L)`.
///
/// Without an explicit `coefficient`, `φ` is normalized so that `Σ_j φ(j) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    #[serde(flatten)]
    pub family: SmoothnessFamily,
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
}

impl SmoothnessProfile {
    /// Normalized profile, `Σ φ = 1`.
    pub fn normalized(family: SmoothnessFamily, l: f64) -> Self {
        SmoothnessProfile {
            family,
            l,
            coefficient: None,
        }
    }

    /// Profile `φ = coefficient · shape` without normalization.
    pub fn with_coefficient(family: SmoothnessFamily, l: f64, coefficient: f64) -> Self {
        SmoothnessProfile {
            family,
            l,
            coefficient: Some(coefficient),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::Domain(format!("L must be positive, got {}", self.l)));
        }
        if let Some(c) = self.coefficient {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Domain(format!("coefficient must be positive, got {c}")));
            }
        }
        match &self.family {
            SmoothnessFamily::Arithmetic { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite()) || *alpha < 0.0 {
                    return Err(Error::Domain(format!("phi_a needs alpha >= 0, got {alpha}")));
                }
                if *alpha == 0.0 && *beta <= 1.0 {
                    return Err(Error::Domain("phi_a with alpha = 0 needs beta > 1".into()));
                }
                if *beta < 0.0 {
                    return Err(Error::Domain(format!("phi_a needs beta >= 0, got {beta}")));
                }
            }
            SmoothnessFamily::Exponential { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Domain(format!("phi_b needs alpha > 0, got {alpha}")));
                }
            }
            SmoothnessFamily::Explicit { values } => check_explicit(values, "smoothness profile")?,
        }
        Ok(())
    }

    pub(crate) fn decay(&self) -> Decay {
        match &self.family {
            SmoothnessFamily::Arithmetic { alpha, beta } => Decay::PowerLog { p: 2.0 + alpha, beta: *beta },
            SmoothnessFamily::Exponential { alpha } => Decay::ExpPower { a: *alpha, g: 0.0 },
            SmoothnessFamily::Explicit { values } => Decay::Explicit(values.clone()),
        }
    }

    /// The constant `C` in `φ = C · shape`.
    pub fn coefficient(&self) -> f64 {
        self.coefficient.unwrap_or_else(|| 1.0 / self.decay().total())
    }

    pub fn phi(&self, j: f64) -> f64 {
        self.coefficient() * self.decay().value(j)
    }

    pub fn values(&self, count: usize) -> Vec<f64> {
        let c = self.coefficient();
        let d = self.decay();
        (1..=count).map(|j| c * d.value(j as f64)).collect()
    }

    /// `Σ_{j>k} φ(j)`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.coefficient() * self.decay().tail_sum(k)
    }

    /// `∫_x^∞ φ(s) ds`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        self.coefficient() * self.decay().tail_integral(x)
    }

    /// `|Σ_j φ(j) − 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.coefficient() * self.decay().total() - 1.0).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_integral(d: &Decay, x: f64, upper: f64) -> f64 {
        // log-spaced composite Simpson, used only as an oracle
        let n = 200_000;
        let (lx, lu) = (x.ln(), upper.ln());
        let h = (lu - lx) / n as f64;
        let g = |v: f64| {
            let s = v.exp();
            d.value(s) * s
        };
        let mut total = g(lx) + g(lu);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * g(lx + i as f64 * h);
        }
        total * h / 3.0
    }

    #[test]
    fn power_tail_integrals_are_closed_form() {
        let d = Decay::PowerLog { p: 3.0, beta: 0.0 };
        assert!((d.tail_integral(10.0) - 0.005).abs() < 1e-15);
        assert!((d.tail_integral(0.5) - (1.5 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn numeric_tail_integrals_match_brute_force() {
        for d in [
            Decay::PowerLog { p: 2.5, beta: 1.5 },
            Decay::PowerLog { p: 2.0, beta: 2.0 },
            Decay::PowerLog { p: 3.0, beta: -1.0 },
            Decay::ExpPower { a: 0.5, g: 1.0 },
        ] {
            for x in [1.0, 3.7, 20.0] {
                let reference = brute_integral(&d, x, 1e9);
                let got = d.tail_integral(x);
                assert!(
                    (got - reference).abs() < 1e-7 * reference,
                    "{d:?} x={x}: {got} vs {reference}"
                );
            }
        }
        let d = Decay::PowerLog { p: 1.0, beta: 2.0 };
        assert!((d.tail_integral(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_sums_match_long_direct_sums() {
        for d in [
            Decay::PowerLog { p: 3.0, beta: 0.0 },
            Decay::PowerLog { p: 2.5, beta: 1.0 },
            Decay::ExpPower { a: 0.3, g: 1.0 },
        ] {
            let direct: f64 = (5..3_000_000).map(|j| d.value(j as f64)).sum::<f64>()
                + d.tail_integral(3_000_000.0);
            let got = d.tail_sum(4);
            assert!((got - direct).abs() < 1e-10 * direct, "{d:?}: {got} vs {direct}");
        }
        // ζ(3)
        let zeta3 = Decay::PowerLog { p: 3.0, beta: 0.0 }.total();
        assert!((zeta3 - 1.202_056_903_159_594_2).abs() < 1e-13);
    }

    #[test]
    fn explicit_profiles() {
        let d = Decay::Explicit(vec![4.0, 2.0, 1.0]);
        assert_eq!(d.value(2.5), 1.5);
        assert_eq!(d.value(3.5), 0.0);
        assert_eq!(d.tail_sum(1), 3.0);
        assert!((d.tail_integral(0.5) - (2.0 + 3.0 + 1.5)).abs() < 1e-15);
        assert!(EigenProfile::explicit(vec![1.0, 2.0]).validate().is_err());
        assert!(EigenProfile::explicit(vec![1.0, 0.0]).validate().is_err());
    }

    #[test]
    fn normalized_phi_sums_to_one() {
        for family in [
            SmoothnessFamily::Arithmetic { alpha: 1.0, beta: 0.0 },
            SmoothnessFamily::Arithmetic { alpha: 0.0, beta: 2.0 },
            SmoothnessFamily::Exponential { alpha: 0.7 },
            SmoothnessFamily::Explicit { values: vec![0.5, 0.2, 0.1] },
        ] {
            let p = SmoothnessProfile::normalized(family, 1.0);
            p.validate().unwrap();
            assert!(p.normalization_error() < 1e-6);
            let direct: f64 = p.values(200_000).iter().sum::<f64>() + p.tail_sum(200_000);
            assert!((direct - 1.0).abs() < 1e-6);
        }
        let p = SmoothnessProfile::normalized(SmoothnessFamily::Arithmetic { alpha: 1.0, beta: 0.0 }, 1.0);
        assert!((p.coefficient() - 1.0 / 1.202_056_903_159_594_2).abs() < 1e-12);
    }

    #[test]
    fn built_in_eigen_profiles_are_convex_and_decreasing() {
        for p in [
            EigenProfile::arithmetic(1.0, 0.0),
            EigenProfile::arithmetic(0.5, 1.0),
            EigenProfile::arithmetic(0.0, 2.0),
            EigenProfile::exponential(0.3, 0.0),
            EigenProfile::exponential(0.2, 1.0),
        ] {
            p.validate().unwrap();
            assert_eq!(p.convexity_violation(500), None, "{p:?}");
            let v = p.values(500);
            assert!(v.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        }
        let bumpy = EigenProfile::explicit(vec![1.0, 0.9, 0.1, 0.09]);
        assert_eq!(bumpy.convexity_violation(4), Some(2));
    }

    #[test]
    fn truncation_meets_tail_tolerance() {
        let p = EigenProfile::exponential(1.0, 0.0);
        let j = p.truncation(1e-6, 1000);
        assert!(p.tail_fraction(j) < 1e-6);
        assert!(p.tail_fraction(j - 1) >= 1e-6);
        assert_eq!(EigenProfile::arithmetic(1.0, 0.0).truncation(1e-6, 32), 32);
    }

    #[test]
    fn profiles_round_trip_through_json() {
        let e = EigenProfile::arithmetic(1.0, 0.5).scaled(2.0);
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"{"family":"arithmetic","alpha":1.0,"beta":0.5,"scale":2.0}"#);
        assert_eq!(serde_json::from_str::<EigenProfile>(&text).unwrap(), e);
        let s: SmoothnessProfile =
            serde_json::from_str(r#"{"family":"exponential","alpha":1.0,"L":2.0}"#).unwrap();
        assert_eq!(s.l, 2.0);
        assert_eq!(s.coefficient, None);
    }
}
