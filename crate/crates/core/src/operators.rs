//! Integral operators on discretized curves: empirical moment operators,
//! functional PCA and the regularized inverses of the covariance operator.
//!
//! A [`KernelOperator`] stores `K(t_q, s_p)` with rows indexed by the output
//! grid and columns by the input grid, so that
//! `(K f)(t_q) = Σ_p w_p K(t_q, s_p) f(s_p)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curves::{ensure_same_grid, Curve, FunctionalSample, Grid};
use crate::error::{Error, Result};
use crate::linalg::{max_residual, symmetric_eigen};

/// Eigenvalues below `RANK_TOLERANCE · λ̂₁` are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Symmetry tolerance for kernels fed to [`fpca`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Residual bound accepted from the eigensolver, relative to `‖B‖_F`.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-10;

const SIGN_THRESHOLD: f64 = 1e-8;

/// Bivariate kernel representing an integral operator between two grids.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    input: Arc<Grid>,
    output: Arc<Grid>,
    kernel: DMatrix<f64>,
}

impl KernelOperator {
    /// `kernel[(q, p)] = K(t_q, s_p)` with `t` on `output`, `s` on `input`.
    pub fn new(input: Arc<Grid>, output: Arc<Grid>, kernel: DMatrix<f64>) -> Result<Self> {
        if kernel.nrows() != output.len() || kernel.ncols() != input.len() {
            return Err(Error::Dimension(format!(
                "kernel is {}x{} but grids have {} (output) and {} (input) points",
                kernel.nrows(),
                kernel.ncols(),
                output.len(),
                input.len()
            )));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("kernel values must be finite".into()));
        }
        Ok(KernelOperator {
            input,
            output,
            kernel,
        })
    }

    /// Operator mapping curves on `grid` to curves on `grid`.
    pub fn square(grid: Arc<Grid>, kernel: DMatrix<f64>) -> Result<Self> {
        KernelOperator::new(grid.clone(), grid, kernel)
    }

    pub fn zeros(input: Arc<Grid>, output: Arc<Grid>) -> Self {
        let kernel = DMatrix::zeros(output.len(), input.len());
        KernelOperator {
            input,
            output,
            kernel,
        }
    }

    pub(crate) fn from_parts(input: Arc<Grid>, output: Arc<Grid>, kernel: DMatrix<f64>) -> Self {
        debug_assert_eq!(kernel.shape(), (output.len(), input.len()));
        KernelOperator {
            input,
            output,
            kernel,
        }
    }

    pub fn input_grid(&self) -> &Arc<Grid> {
        &self.input
    }

    pub fn output_grid(&self) -> &Arc<Grid> {
        &self.output
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn is_square(&self) -> bool {
        self.input.same_as(&self.output)
    }

    /// `max |K(s,t) − K(t,s)|`, or `None` when the grids differ.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.kernel.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.kernel[(i, j)] - self.kernel[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        self.asymmetry().is_some_and(|a| a <= tolerance)
    }

    /// `self − other` on identical grids.
    pub fn difference(&self, other: &KernelOperator) -> Result<KernelOperator> {
        ensure_same_grid(&self.input, &other.input, "difference (input)")?;
        ensure_same_grid(&self.output, &other.output, "difference (output)")?;
        Ok(KernelOperator::from_parts(
            self.input.clone(),
            self.output.clone(),
            &self.kernel - &other.kernel,
        ))
    }
}

fn input_weighted(kernel: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = kernel.clone();
    for (p, mut col) in out.column_iter_mut().enumerate() {
        col *= w[p];
    }
    out
}

/// `A ∘ B`: kernel `Σ_p A(t, u_p) w_p B(u_p, s)`.
pub fn compose(a: &KernelOperator, b: &KernelOperator) -> Result<KernelOperator> {
    ensure_same_grid(&a.input, &b.output, "compose")?;
    let kernel = input_weighted(&a.kernel, a.input.weights()) * &b.kernel;
    Ok(KernelOperator::from_parts(b.input.clone(), a.output.clone(), kernel))
}

/// Image of a curve under the operator.
pub fn apply(a: &KernelOperator, f: &Curve) -> Result<Curve> {
    ensure_same_grid(&a.input, f.grid(), "apply")?;
    let wf = DVector::from_iterator(
        f.values().len(),
        f.values().iter().zip(a.input.weights()).map(|(v, w)| v * w),
    );
    let values = (&a.kernel * wf).iter().copied().collect();
    Ok(Curve::from_parts(a.output.clone(), values))
}

/// Hilbert–Schmidt norm: the `L²` norm of the kernel on the unit square.
pub fn hs_norm(a: &KernelOperator) -> f64 {
    let wi = a.input.weights();
    let wo = a.output.weights();
    let mut total = 0.0;
    for (p, col) in a.kernel.column_iter().enumerate() {
        let s: f64 = col.iter().zip(wo).map(|(k, w)| w * k * k).sum();
        total += wi[p] * s;
    }
    total.sqrt()
}

/// `Σ_p w_p K(t_p, t_p)`.
pub fn trace(a: &KernelOperator) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("trace of an operator between different grids".into()));
    }
    Ok(a.input
        .weights()
        .iter()
        .enumerate()
        .map(|(p, w)| w * a.kernel[(p, p)])
        .sum())
}

fn require_centered(sample: &FunctionalSample, name: &str) -> Result<()> {
    if sample.is_centered() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{name} must be centered (subtract its mean curve first)"
        )))
    }
}

/// `Γ_n = (1/n) Σ X_i ⊗ X_i` for a centered sample.
pub fn empirical_covariance(x: &FunctionalSample) -> Result<KernelOperator> {
    if x.is_empty() {
        return Err(Error::Domain("empirical covariance of an empty sample".into()));
    }
    require_centered(x, "X")?;
    let m = x.matrix();
    let kernel = m.transpose() * m / x.len() as f64;
    Ok(KernelOperator::from_parts(x.grid().clone(), x.grid().clone(), kernel))
}

/// `Δ_n = (1/n) Σ Y_i ⊗ X_i`, mapping curves on the `X` grid to the `Y` grid.
pub fn empirical_cross_covariance(
    y: &FunctionalSample,
    x: &FunctionalSample,
) -> Result<KernelOperator> {
    if y.len() != x.len() {
        return Err(Error::Dimension(format!(
            "sample sizes differ: {} outputs, {} inputs",
            y.len(),
            x.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Domain("cross covariance of empty samples".into()));
    }
    require_centered(x, "X")?;
    require_centered(y, "Y")?;
    let kernel = y.matrix().transpose() * x.matrix() / x.len() as f64;
    Ok(KernelOperator::from_parts(x.grid().clone(), y.grid().clone(), kernel))
}

/// Filter applied to the retained empirical eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizationScheme {
    /// `1/λ`.
    #[default]
    SpectralCut,
    /// `1/(α + λ)`.
    Ridge { alpha: f64 },
    /// `λ/(α + λ²)`.
    Tikhonov { alpha: f64 },
}

impl RegularizationScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegularizationScheme::SpectralCut => Ok(()),
            RegularizationScheme::Ridge { alpha } | RegularizationScheme::Tikhonov { alpha } => {
                if alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "regularization parameter must be positive, got {alpha}"
                    )))
                }
            }
        }
    }

    pub fn filter(&self, lambda: f64) -> f64 {
        match *self {
            RegularizationScheme::SpectralCut => 1.0 / lambda,
            RegularizationScheme::Ridge { alpha } => 1.0 / (alpha + lambda),
            RegularizationScheme::Tikhonov { alpha } => lambda / (alpha + lambda * lambda),
        }
    }
}

impl fmt::Display for RegularizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizationScheme::SpectralCut => write!(f, "cut"),
            RegularizationScheme::Ridge { alpha } => write!(f, "ridge:{alpha}"),
            RegularizationScheme::Tikhonov { alpha } => write!(f, "tikhonov:{alpha}"),
        }
    }
}

impl FromStr for RegularizationScheme {
    type Err = Error;

    /// Parses `cut`, `ridge:ALPHA` or `tikhonov:ALPHA`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let alpha = || -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Parse(format!("scheme `{name}` needs :ALPHA")))?;
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid alpha `{a}`")))
        };
        let scheme = match (name.trim(), arg) {
            ("cut", None) => RegularizationScheme::SpectralCut,
            ("ridge", _) => RegularizationScheme::Ridge { alpha: alpha()? },
            ("tikhonov", _) => RegularizationScheme::Tikhonov { alpha: alpha()? },
            _ => return Err(Error::Parse(format!("unknown scheme `{s}`"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// Retained eigenpairs of a symmetric integral operator, sorted descending.
///
/// Eigenfunctions are orthonormal in the quadrature inner product and
/// sign-normalized: the first coordinate with magnitude above `1e-8` is
/// positive. Within a tie block individual eigenfunctions are not
/// identifiable; their span is.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    grid: Arc<Grid>,
    values: Vec<f64>,
    functions: DMatrix<f64>,
}

impl EigenSystem {
    /// Builds from descending values and eigenfunction columns (`P × r`).
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, functions: DMatrix<f64>) -> Result<Self> {
        if functions.nrows() != grid.len() || functions.ncols() != values.len() {
            return Err(Error::Dimension(format!(
                "eigenfunction matrix is {}x{}, expected {}x{}",
                functions.nrows(),
                functions.ncols(),
                grid.len(),
                values.len()
            )));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Precondition("eigenvalues must be sorted descending".into()));
        }
        Ok(EigenSystem {
            grid,
            values,
            functions,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Eigenfunction values, one column per retained pair.
    pub fn functions(&self) -> &DMatrix<f64> {
        &self.functions
    }

    /// The `j`-th eigenfunction, zero-based.
    pub fn eigenfunction(&self, j: usize) -> Curve {
        Curve::from_parts(self.grid.clone(), self.functions.column(j).iter().copied().collect())
    }

    /// Copy with the sign of eigenfunction `j` reversed.
    pub fn with_flipped_sign(&self, j: usize) -> EigenSystem {
        let mut out = self.clone();
        out.functions.column_mut(j).neg_mut();
        out
    }

    /// True when `λ̂_k` and `λ̂_{k+1}` coincide numerically (1-based `k`).
    pub fn cut_splits_tie(&self, k: usize) -> bool {
        if k == 0 || k >= self.values.len() {
            return false;
        }
        (self.values[k - 1] - self.values[k]).abs() <= RANK_TOLERANCE * self.values[0]
    }

    fn check_cut(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Domain("cut level k must be positive".into()));
        }
        if k > self.rank() {
            return Err(Error::CutExceedsRank {
                k,
                max_k: self.rank(),
            });
        }
        if self.cut_splits_tie(k) {
            log::warn!("cut level {k} falls inside a block of tied eigenvalues");
        }
        Ok(())
    }

    /// `Σ_{j≤k} c_j ê_j(t) ê_j(s)`.
    fn spectral_kernel(&self, k: usize, coef: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let e = self.functions.columns(0, k);
        let mut scaled = e.clone_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= coef(self.values[j]);
        }
        scaled * e.transpose()
    }
}

fn sign_normalize(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Keeps eigenpairs above the rank tolerance, maps to eigenfunctions through
/// `to_function`, renormalizes in the quadrature inner product.
fn finish_eigensystem(
    grid: &Arc<Grid>,
    values: &[f64],
    mut to_function: impl FnMut(usize) -> Vec<f64>,
) -> EigenSystem {
    let top = values.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        values.iter().take_while(|&&l| l > RANK_TOLERANCE * top).count()
    } else {
        0
    };
    let w = grid.weights();
    let mut functions = DMatrix::zeros(grid.len(), rank);
    for j in 0..rank {
        let mut f = to_function(j);
        let nrm = crate::curves::weighted_dot(w, &f, &f).sqrt();
        f.iter_mut().for_each(|x| *x /= nrm);
        sign_normalize(&mut f);
        functions.set_column(j, &DVector::from_vec(f));
    }
    EigenSystem {
        grid: grid.clone(),
        values: values[..rank].to_vec(),
        functions,
    }
}

/// Functional PCA of a symmetric kernel operator.
///
/// Solves the symmetric problem for `W^{1/2} K W^{1/2}` and maps the
/// eigenvectors `v` back to eigenfunctions `W^{-1/2} v`.
pub fn fpca(gamma: &KernelOperator) -> Result<EigenSystem> {
    match gamma.asymmetry() {
        None => return Err(Error::Precondition("fpca needs an operator on a single grid".into())),
        Some(a) if a > SYMMETRY_TOLERANCE * gamma.kernel.amax().max(1.0) => {
            return Err(Error::Precondition(format!("kernel is not symmetric (max asymmetry {a:e})")))
        }
        _ => {}
    }
    let grid = gamma.input.clone();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let n = grid.len();
    let b = DMatrix::from_fn(n, n, |q, p| {
        let sym = 0.5 * (gamma.kernel[(q, p)] + gamma.kernel[(p, q)]);
        sw[q] * sym * sw[p]
    });
    let eig = symmetric_eigen(&b)?;
    check_residual(&b, &eig)?;
    let values: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    Ok(finish_eigensystem(&grid, &values, |j| {
        (0..n).map(|q| eig.vectors[(q, j)] / sw[q]).collect()
    }))
}

fn check_residual(b: &DMatrix<f64>, eig: &crate::linalg::SymmetricEigen) -> Result<()> {
    let scale = b.norm();
    if scale == 0.0 {
        return Ok(());
    }
    let residual = max_residual(b, eig);
    if residual > EIGEN_RESIDUAL_TOLERANCE * scale {
        return Err(Error::Numeric {
            message: "eigensolver residual above tolerance".into(),
            residual,
        });
    }
    Ok(())
}

/// Functional PCA of the empirical covariance of a centered sample.
///
/// When `n < P/2` the `n × n` Gram problem `(1/n)⟨X_i, X_l⟩` is solved instead
/// and eigenfunctions are recovered as `Σ_i u_i X_i / √(nλ)`.
pub fn fpca_sample(x: &FunctionalSample) -> Result<EigenSystem> {
    require_centered(x, "X")?;
    let n = x.len();
    let p = x.grid().len();
    if n == 0 {
        return Err(Error::Domain("fpca of an empty sample".into()));
    }
    if 2 * n >= p {
        return fpca(&empirical_covariance(x)?);
    }
    let w = x.grid().weights();
    let m = x.matrix();
    let weighted = input_weighted(m, w);
    let gram = (&weighted * m.transpose()) / n as f64;
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = symmetric_eigen(&gram)?;
    check_residual(&gram, &eig)?;
    let values: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    Ok(finish_eigensystem(x.grid(), &values, |j| {
        let u = eig.vectors.column(j);
        (m.transpose() * u).iter().copied().collect()
    }))
}

/// `Σ_{j≤k} f_n(λ̂_j) ê_j ⊗ ê_j` for the chosen filter `f_n`.
pub fn regularized_inverse(
    eig: &EigenSystem,
    k: usize,
    scheme: RegularizationScheme,
) -> Result<KernelOperator> {
    scheme.validate()?;
    eig.check_cut(k)?;
    let kernel = eig.spectral_kernel(k, |l| scheme.filter(l));
    Ok(KernelOperator::from_parts(eig.grid.clone(), eig.grid.clone(), kernel))
}

/// Orthogonal projector onto `span(ê_1, …, ê_k)`.
pub fn projector(eig: &EigenSystem, k: usize) -> Result<KernelOperator> {
    eig.check_cut(k)?;
    let kernel = eig.spectral_kernel(k, |_| 1.0);
    Ok(KernelOperator::from_parts(eig.grid.clone(), eig.grid.clone(), kernel))
}
