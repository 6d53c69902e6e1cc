//! Scenario files and the true model they describe.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::basis::{check_orthonormal, Basis};
use crate::curves::{FunctionalSample, Grid};
use crate::error::{Error, Result};
use crate::operators::{KernelOperator, RegularizationScheme};
use crate::profiles::{EigenProfile, SmoothnessProfile};
use crate::selection::optimal_k_oracle;

/// Relative tail mass targeted by the Karhunen-Loève truncation.
pub const TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Uniform(usize),
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self {
            GridSpec::Uniform(p) => Grid::uniform(*p),
            GridSpec::Points(points) => Grid::new(points.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub profile: EigenProfile,
    #[serde(default)]
    pub basis: Basis,
    /// Number of Karhunen-Loève terms; chosen from the tail mass when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Zero,
    /// `S e_j = L φ(j)^{1/2} λ_j^{-1/2} e_j`.
    Extremal { smoothness: SmoothnessProfile },
    /// `S e_j = c_j e_j` in the input basis.
    Diagonal { coefficients: Vec<f64> },
    /// Kernel values `S(t_q, s_p)`, one row per output point.
    Kernel { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub profile: EigenProfile,
    /// `σ_ε² = tr Γ_ε`; the profile is rescaled to this total.
    pub variance: f64,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Fixed(usize),
    /// Oracle dimension of the true model.
    Oracle,
    Cv { folds: usize, k_max: usize },
}

fn default_reps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: GridSpec,
    pub input: InputSpec,
    pub operator: OperatorSpec,
    pub noise: NoiseSpec,
    pub n: usize,
    pub selection: SelectionRule,
    #[serde(default)]
    pub scheme: RegularizationScheme,
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.input.profile.validate()?;
        if !(self.noise.variance.is_finite() && self.noise.variance >= 0.0) {
            return Err(Error::Domain(format!(
                "noise.variance must be nonnegative, got {}",
                self.noise.variance
            )));
        }
        if self.noise.variance > 0.0 {
            self.noise.profile.validate()?;
        }
        if self.n < 2 {
            return Err(Error::Domain(format!("n must be at least 2, got {}", self.n)));
        }
        self.scheme.validate()?;
        match self.selection {
            SelectionRule::Fixed(0) => return Err(Error::Domain("selection: k must be positive".into())),
            SelectionRule::Cv { folds, k_max } if folds < 2 || k_max == 0 => {
                return Err(Error::Domain("selection: cv needs folds >= 2 and k_max >= 1".into()))
            }
            _ => {}
        }
        if let OperatorSpec::Extremal { smoothness } = &self.operator {
            smoothness.validate()?;
        }
        Ok(())
    }

    /// Builds the true model (grid, bases, spectra and kernel).
    pub fn truth(&self) -> Result<Truth> {
        self.validate()?;
        let grid = Arc::new(self.grid.build()?);
        let cap = Basis::max_size(&grid);
        let terms = |profile: &EigenProfile, fixed: Option<usize>, what: &str| -> Result<usize> {
            let j = match fixed {
                Some(j) => j,
                None => match profile.explicit_len() {
                    Some(len) => len,
                    None => profile.truncation(TAIL_TOLERANCE, cap),
                },
            };
            if j == 0 || j > cap {
                return Err(Error::Domain(format!(
                    "{what}: {j} terms do not fit a grid of {} points (at most {cap})",
                    grid.len()
                )));
            }
            Ok(j)
        };
        let j_x = terms(&self.input.profile, self.input.terms, "input")?;
        let basis = self.input.basis.matrix(&grid, j_x)?;
        let lambdas = self.input.profile.values(j_x);
        let tail_fraction = match self.input.profile.explicit_len() {
            Some(_) => 0.0,
            None => self.input.profile.tail_fraction(j_x),
        };

        let (noise_basis, noise_lambdas) = if self.noise.variance > 0.0 {
            let j_e = terms(&self.noise.profile, self.noise.terms, "noise")?;
            let raw = self.noise.profile.values(j_e);
            let total: f64 = raw.iter().sum();
            let scaled = raw.iter().map(|v| v * self.noise.variance / total).collect();
            (self.noise.basis.matrix(&grid, j_e)?, scaled)
        } else {
            (DMatrix::zeros(grid.len(), 0), Vec::new())
        };

        let (kernel, diagonal) = match &self.operator {
            OperatorSpec::Zero => (DMatrix::zeros(grid.len(), grid.len()), Some(vec![0.0; j_x])),
            OperatorSpec::Extremal { smoothness } => {
                let c = extremal_coefficients(smoothness, &lambdas)?;
                (diagonal_kernel(&basis, &c), Some(c))
            }
            OperatorSpec::Diagonal { coefficients } => {
                if coefficients.len() > j_x {
                    return Err(Error::Dimension(format!(
                        "operator.coefficients has {} entries but the input uses {j_x} terms",
                        coefficients.len()
                    )));
                }
                let mut c = coefficients.clone();
                c.resize(j_x, 0.0);
                (diagonal_kernel(&basis, &c), Some(c))
            }
            OperatorSpec::Kernel { values } => {
                let p = grid.len();
                if values.len() != p || values.iter().any(|r| r.len() != p) {
                    return Err(Error::Dimension(format!("operator.values must be {p}x{p}")));
                }
                (DMatrix::from_fn(p, p, |q, s| values[q][s]), None)
            }
        };
        let s = KernelOperator::square(grid.clone(), kernel)?;
        let mut wb = basis.clone();
        for (p, mut row) in wb.row_iter_mut().enumerate() {
            row *= grid.weights()[p];
        }
        let s_on_basis = s.kernel() * &wb;
        Ok(Truth {
            grid,
            basis,
            lambdas,
            tail_fraction,
            noise_basis,
            noise_lambdas,
            s,
            s_on_basis,
            diagonal,
            smoothness: match &self.operator {
                OperatorSpec::Extremal { smoothness } => Some(smoothness.clone()),
                _ => None,
            },
        })
    }
}

/// `c_j = L φ(j)^{1/2} λ_j^{-1/2}`.
fn extremal_coefficients(phi: &SmoothnessProfile, lambdas: &[f64]) -> Result<Vec<f64>> {
    let phis = phi.values(lambdas.len());
    let c: Vec<f64> = phis
        .iter()
        .zip(lambdas)
        .map(|(f, l)| phi.l * f.sqrt() / l.sqrt())
        .collect();
    check_summable(&c)?;
    Ok(c)
}

/// Rejects coefficient sequences whose squares decay no faster than `1/j`
/// at the truncation horizon, i.e. operators that are not Hilbert-Schmidt.
fn check_summable(c: &[f64]) -> Result<()> {
    let j = c.len();
    if j < 4 {
        return Ok(());
    }
    let (half, last) = (c[j / 2 - 1].powi(2), c[j - 1].powi(2));
    if last == 0.0 {
        return Ok(());
    }
    let exponent = (half / last).log2() / ((j as f64) / (j / 2) as f64).log2();
    if exponent <= 1.0 {
        return Err(Error::Domain(format!(
            "operator is not Hilbert-Schmidt: squared coefficients decay like j^-{exponent:.3}"
        )));
    }
    Ok(())
}

fn diagonal_kernel(basis: &DMatrix<f64>, c: &[f64]) -> DMatrix<f64> {
    let mut scaled = basis.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= c[j];
    }
    scaled * basis.transpose()
}

/// Diagonal operator `Σ_j L φ(j)^{1/2} λ_j^{-1/2} e_j ⊗ e_j` on the basis columns.
pub fn diagonal_operator(
    grid: Arc<Grid>,
    phi: &SmoothnessProfile,
    lambda: &EigenProfile,
    basis: &DMatrix<f64>,
) -> Result<KernelOperator> {
    phi.validate()?;
    lambda.validate()?;
    check_orthonormal(&grid, basis)?;
    let c = extremal_coefficients(phi, &lambda.values(basis.ncols()))?;
    KernelOperator::square(grid, diagonal_kernel(basis, &c))
}

/// Draws `n` Karhunen-Loève curves `Σ_j √λ_j ξ_j e_j` with Gaussian `ξ_j`.
pub fn kl_draw<R: Rng>(basis: &DMatrix<f64>, lambdas: &[f64], n: usize, rng: &mut R) -> DMatrix<f64> {
    let j = lambdas.len();
    if j == 0 {
        return DMatrix::zeros(n, basis.nrows());
    }
    let sd: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let scores = DMatrix::from_fn(n, j, |_, c| {
        let z: f64 = rng.sample(StandardNormal);
        z * sd[c]
    });
    scores * basis.columns(0, j).transpose()
}

/// `n` independent Karhunen-Loève curves on `grid`.
pub fn kl_sample(
    grid: Arc<Grid>,
    profile: &EigenProfile,
    basis: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<FunctionalSample> {
    use rand::SeedableRng;
    profile.validate()?;
    check_orthonormal(&grid, basis)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = kl_draw(basis, &profile.values(basis.ncols()), n, &mut rng);
    FunctionalSample::from_matrix(grid, data)
}

/// The simulated population: `X` spectrum and basis, `S`, and `Γ_ε`.
#[derive(Debug, Clone)]
pub struct Truth {
    pub grid: Arc<Grid>,
    /// `P × J` input eigenfunctions.
    pub basis: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    /// Relative eigenvalue mass beyond the truncation.
    pub tail_fraction: f64,
    pub noise_basis: DMatrix<f64>,
    pub noise_lambdas: Vec<f64>,
    pub s: KernelOperator,
    /// `S e_j` as columns.
    pub s_on_basis: DMatrix<f64>,
    /// `c_j` when `S e_j = c_j e_j`.
    pub diagonal: Option<Vec<f64>>,
    pub smoothness: Option<SmoothnessProfile>,
}

impl Truth {
    pub fn terms(&self) -> usize {
        self.lambdas.len()
    }

    pub fn sigma2_eps(&self) -> f64 {
        self.noise_lambdas.iter().sum()
    }

    /// `‖S e_j‖` for `j = 1..J`.
    pub fn s_norms(&self) -> Vec<f64> {
        let w = self.grid.weights();
        self.s_on_basis
            .column_iter()
            .map(|c| c.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// `Σ_{j>k} λ_j ‖S e_j‖²` over the simulated terms.
    pub fn bias_term(&self, k: usize) -> f64 {
        self.s_norms()
            .iter()
            .zip(&self.lambdas)
            .skip(k)
            .map(|(s, l)| l * s * s)
            .sum()
    }

    /// `σ_ε² k / n`.
    pub fn variance_term(&self, k: usize, n: usize) -> f64 {
        self.sigma2_eps() * k as f64 / n as f64
    }

    /// `‖S Γ^{1/2}‖_HS`.
    pub fn l(&self) -> f64 {
        self.s_norms()
            .iter()
            .zip(&self.lambdas)
            .map(|(s, l)| l * s * s)
            .sum::<f64>()
            .sqrt()
    }

    /// Oracle dimension: the integral-equation solution for extremal
    /// operators, otherwise the minimizer of `σ²k/n + Σ_{j>k} λ_j‖Se_j‖²`.
    pub fn oracle_k(&self, n: usize) -> Result<usize> {
        let sigma2 = self.sigma2_eps();
        if sigma2 <= 0.0 {
            return Err(Error::Precondition("oracle dimension needs positive noise variance".into()));
        }
        let k = match &self.smoothness {
            Some(phi) => optimal_k_oracle(phi, sigma2, n as u64)?,
            None => (1..=self.terms())
                .map(|k| (k, self.variance_term(k, n) + self.bias_term(k)))
                .fold((1, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
                .0,
        };
        Ok(k.min(self.terms()))
    }
}
