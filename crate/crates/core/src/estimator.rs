//! The spectral-cut estimator `Ŝ = Δ_n Γ_n†`, its predictor and the
//! residual-based noise covariance.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curves::{center, ensure_same_grid, Curve, FunctionalSample, Grid};
use crate::error::{Error, Result};
use crate::operators::{
    apply, compose, empirical_covariance, empirical_cross_covariance, fpca_sample,
    regularized_inverse, trace, EigenSystem, KernelOperator, RegularizationScheme,
};

/// Centered training data together with the functional PCA of the inputs.
///
/// Everything that does not depend on the cut level is computed once here,
/// so several `k` can be fitted from one design.
#[derive(Debug, Clone)]
pub struct Design {
    x: FunctionalSample,
    y: FunctionalSample,
    mean_x: Curve,
    mean_y: Curve,
    eig: EigenSystem,
    cross: KernelOperator,
}

impl Design {
    pub fn new(x: &FunctionalSample, y: &FunctionalSample) -> Result<Self> {
        check_sizes(x, y)?;
        let (xc, mean_x) = center(x)?;
        let (yc, mean_y) = center(y)?;
        Self::build(xc, yc, mean_x, mean_y)
    }

    /// Design for data whose population means are known: moments are taken
    /// about `mean_x`, `mean_y` instead of the empirical means.
    pub fn with_known_means(
        x: &FunctionalSample,
        y: &FunctionalSample,
        mean_x: &Curve,
        mean_y: &Curve,
    ) -> Result<Self> {
        check_sizes(x, y)?;
        ensure_same_grid(x.grid(), mean_x.grid(), "known mean (X)")?;
        ensure_same_grid(y.grid(), mean_y.grid(), "known mean (Y)")?;
        Self::build(shift(x, mean_x), shift(y, mean_y), mean_x.clone(), mean_y.clone())
    }

    fn build(
        x: FunctionalSample,
        y: FunctionalSample,
        mean_x: Curve,
        mean_y: Curve,
    ) -> Result<Self> {
        let eig = fpca_sample(&x)?;
        if eig.rank() == 0 {
            return Err(Error::RankZero);
        }
        let cross = empirical_cross_covariance(&y, &x)?;
        Ok(Design {
            x,
            y,
            mean_x,
            mean_y,
            eig,
            cross,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn centered_x(&self) -> &FunctionalSample {
        &self.x
    }

    pub fn centered_y(&self) -> &FunctionalSample {
        &self.y
    }

    pub fn mean_x(&self) -> &Curve {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &Curve {
        &self.mean_y
    }

    /// `Δ_n`.
    pub fn cross_covariance(&self) -> &KernelOperator {
        &self.cross
    }

    /// `Γ_n`.
    pub fn covariance(&self) -> Result<KernelOperator> {
        empirical_covariance(&self.x)
    }

    /// `Ŝ = Δ_n Γ_n†` as a kernel on (Y grid) × (X grid).
    pub fn estimate(&self, k: usize, scheme: RegularizationScheme) -> Result<KernelOperator> {
        let inverse = regularized_inverse(&self.eig, k, scheme)?;
        compose(&self.cross, &inverse)
    }

    /// Kernel from the explicit double sum
    /// `(1/n) Σ_i Σ_{j≤k} f(λ̂_j) ⟨X_i, ê_j⟩ Y_i(t) ê_j(s)`.
    pub fn estimate_from_scores(
        &self,
        k: usize,
        scheme: RegularizationScheme,
    ) -> Result<KernelOperator> {
        scheme.validate()?;
        self.check_cut(k)?;
        let b = self.output_directions(k, scheme);
        let e = self.eig.functions().columns(0, k);
        let kernel = b * e.transpose();
        Ok(KernelOperator::new(
            self.x.grid().clone(),
            self.y.grid().clone(),
            kernel,
        )?)
    }

    /// Columns `f(λ̂_j) (1/n) Σ_i ⟨X_i, ê_j⟩ Y_i` for `j ≤ k`.
    fn output_directions(&self, k: usize, scheme: RegularizationScheme) -> DMatrix<f64> {
        let scores = self.scores(k);
        let n = self.len() as f64;
        let mut b = self.y.matrix().transpose() * scores / n;
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= scheme.filter(self.eig.eigenvalues()[j]);
        }
        b
    }

    /// `n × k` matrix of `⟨X_i, ê_j⟩`.
    fn scores(&self, k: usize) -> DMatrix<f64> {
        let w = self.x.grid().weights();
        let mut weighted = self.eig.functions().columns(0, k).clone_owned();
        for (p, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[p];
        }
        self.x.matrix() * weighted
    }

    fn check_cut(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Domain("cut level k must be positive".into()));
        }
        if k > self.eig.rank() {
            return Err(Error::CutExceedsRank {
                k,
                max_k: self.eig.rank(),
            });
        }
        Ok(())
    }

    /// Prediction through the principal scores of `x_new` rather than the kernel.
    pub fn predict_from_scores(
        &self,
        k: usize,
        scheme: RegularizationScheme,
        x_new: &Curve,
    ) -> Result<Curve> {
        ensure_same_grid(self.x.grid(), x_new.grid(), "predict")?;
        scheme.validate()?;
        self.check_cut(k)?;
        let dx = x_new.sub(&self.mean_x)?;
        let b = self.output_directions(k, scheme);
        let mut out = self.mean_y.values().to_vec();
        for j in 0..k {
            let score = crate::curves::weighted_dot(
                self.x.grid().weights(),
                dx.values(),
                self.eig.functions().column(j).as_slice(),
            );
            for (o, bj) in out.iter_mut().zip(b.column(j).iter()) {
                *o += score * bj;
            }
        }
        Curve::new(self.y.grid().clone(), out)
    }

    /// Full fit at cut level `k`, including residual noise covariance.
    pub fn fit(&self, k: usize, scheme: RegularizationScheme) -> Result<FittedModel> {
        let s_hat = self.estimate(k, scheme)?;
        let resid = centered_residuals(&s_hat, &self.x, &self.y);
        let (noise_cov, sigma2_eps) = noise_covariance(&resid)?;
        Ok(FittedModel {
            eig: self.eig.clone(),
            k,
            scheme,
            s_hat,
            mean_x: self.mean_x.clone(),
            mean_y: self.mean_y.clone(),
            noise_cov,
            sigma2_eps,
            n: self.len(),
        })
    }
}

fn check_sizes(x: &FunctionalSample, y: &FunctionalSample) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "sample sizes differ: {} inputs, {} outputs",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Rows minus `m`, flagged as centered about that curve.
fn shift(s: &FunctionalSample, m: &Curve) -> FunctionalSample {
    let mut data = s.matrix().clone();
    for (j, mut col) in data.column_iter_mut().enumerate() {
        col.add_scalar_mut(-m.values()[j]);
    }
    FunctionalSample::from_parts(s.grid().clone(), data, true)
}

/// A fitted functional linear model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    eig: EigenSystem,
    k: usize,
    scheme: RegularizationScheme,
    s_hat: KernelOperator,
    mean_x: Curve,
    mean_y: Curve,
    noise_cov: KernelOperator,
    sigma2_eps: f64,
    n: usize,
}

impl FittedModel {
    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scheme(&self) -> RegularizationScheme {
        self.scheme
    }

    /// `Ŝ`.
    pub fn kernel(&self) -> &KernelOperator {
        &self.s_hat
    }

    pub fn mean_x(&self) -> &Curve {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &Curve {
        &self.mean_y
    }

    /// `Γ̂_ε`.
    pub fn noise_covariance(&self) -> &KernelOperator {
        &self.noise_cov
    }

    /// `σ̂²_ε = tr Γ̂_ε`.
    pub fn sigma2_eps(&self) -> f64 {
        self.sigma2_eps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_grid(&self) -> &Arc<Grid> {
        self.s_hat.input_grid()
    }

    pub fn y_grid(&self) -> &Arc<Grid> {
        self.s_hat.output_grid()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }
}

/// Fits `Ŝ` at cut level `k` from raw (uncentered) samples.
pub fn fit(
    x: &FunctionalSample,
    y: &FunctionalSample,
    k: usize,
    scheme: RegularizationScheme,
) -> Result<FittedModel> {
    Design::new(x, y)?.fit(k, scheme)
}

/// `Ŷ = ȳ + Ŝ (x_new − x̄)`.
pub fn predict(model: &FittedModel, x_new: &Curve) -> Result<Curve> {
    ensure_same_grid(model.x_grid(), x_new.grid(), "predict")?;
    let dx = x_new.sub(&model.mean_x)?;
    apply(&model.s_hat, &dx)?.add(&model.mean_y)
}

fn centered_residuals(
    s_hat: &KernelOperator,
    xc: &FunctionalSample,
    yc: &FunctionalSample,
) -> FunctionalSample {
    let w = xc.grid().weights();
    let mut xw = xc.matrix().clone();
    for (p, mut col) in xw.column_iter_mut().enumerate() {
        col *= w[p];
    }
    let fitted = xw * s_hat.kernel().transpose();
    FunctionalSample::from_parts(yc.grid().clone(), yc.matrix() - fitted, false)
}

/// `ε̂_i = (Y_i − ȳ) − Ŝ (X_i − x̄)` using the model's stored means.
pub fn residuals(
    model: &FittedModel,
    x: &FunctionalSample,
    y: &FunctionalSample,
) -> Result<FunctionalSample> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "sample sizes differ: {} inputs, {} outputs",
            x.len(),
            y.len()
        )));
    }
    ensure_same_grid(model.x_grid(), x.grid(), "residuals (X)")?;
    ensure_same_grid(model.y_grid(), y.grid(), "residuals (Y)")?;
    let xc = shift(x, &model.mean_x);
    let yc = shift(y, &model.mean_y);
    Ok(centered_residuals(&model.s_hat, &xc, &yc))
}

/// `Γ̂_ε = (1/n) Σ ε̂_i ⊗ ε̂_i` on centered residuals, and its trace.
///
/// The divisor is `n`, with no correction for the fitted directions.
pub fn noise_covariance(residuals: &FunctionalSample) -> Result<(KernelOperator, f64)> {
    let (centered, _) = center(residuals)?;
    let cov = empirical_covariance(&centered)?;
    let sigma2 = trace(&cov)?.max(0.0);
    Ok((cov, sigma2))
}

const MODEL_FORMAT: &str = "funreg-model/1";

/// On-disk JSON layout of a [`FittedModel`].
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    n: usize,
    k: usize,
    scheme: RegularizationScheme,
    x_grid: Vec<f64>,
    y_grid: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// One entry per eigenfunction.
    eigenfunctions: Vec<Vec<f64>>,
    /// Rows indexed by the Y grid, columns by the X grid.
    kernel: Vec<Vec<f64>>,
    mean_x: Vec<f64>,
    mean_y: Vec<f64>,
    noise_kernel: Vec<Vec<f64>>,
    sigma2_eps: f64,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<&FittedModel> for ModelDocument {
    fn from(m: &FittedModel) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            n: m.n,
            k: m.k,
            scheme: m.scheme,
            x_grid: m.x_grid().points().to_vec(),
            y_grid: m.y_grid().points().to_vec(),
            eigenvalues: m.eig.eigenvalues().to_vec(),
            eigenfunctions: m
                .eig
                .functions()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            kernel: matrix_rows(m.s_hat.kernel()),
            mean_x: m.mean_x.values().to_vec(),
            mean_y: m.mean_y.values().to_vec(),
            noise_kernel: matrix_rows(m.noise_cov.kernel()),
            sigma2_eps: m.sigma2_eps,
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<FittedModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Parse(format!("unknown model format `{}`", self.format)));
        }
        let xg = Arc::new(Grid::new(self.x_grid)?);
        let yg = Arc::new(Grid::new(self.y_grid)?);
        let (px, py) = (xg.len(), yg.len());
        let rank = self.eigenvalues.len();
        if self.eigenfunctions.len() != rank || self.eigenfunctions.iter().any(|f| f.len() != px) {
            return Err(Error::Dimension("eigenfunctions do not match eigenvalues and grid".into()));
        }
        let functions = DMatrix::from_fn(px, rank, |p, j| self.eigenfunctions[j][p]);
        let eig = EigenSystem::new(xg.clone(), self.eigenvalues, functions)?;
        if self.k == 0 || self.k > rank {
            return Err(Error::CutExceedsRank {
                k: self.k,
                max_k: rank,
            });
        }
        self.scheme.validate()?;
        let s_hat = KernelOperator::new(
            xg.clone(),
            yg.clone(),
            rows_matrix(&self.kernel, py, px, "kernel")?,
        )?;
        let noise_cov = KernelOperator::new(
            yg.clone(),
            yg.clone(),
            rows_matrix(&self.noise_kernel, py, py, "noise_kernel")?,
        )?;
        let trace_value = trace(&noise_cov)?;
        if (trace_value.max(0.0) - self.sigma2_eps).abs() > 1e-10 * trace_value.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "sigma2_eps {} disagrees with the noise kernel trace {trace_value}",
                self.sigma2_eps
            )));
        }
        Ok(FittedModel {
            eig,
            k: self.k,
            scheme: self.scheme,
            s_hat,
            mean_x: Curve::new(xg, self.mean_x)?,
            mean_y: Curve::new(yg, self.mean_y)?,
            noise_cov,
            sigma2_eps: self.sigma2_eps,
            n: self.n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{inner_product, norm};
    use crate::operators::projector;

    fn grid(p: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(p).unwrap())
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
        fn sample(&mut self, g: &Arc<Grid>, n: usize) -> FunctionalSample {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..g.len()).map(|_| self.next()).collect()).collect();
            FunctionalSample::from_rows(g.clone(), &rows).unwrap()
        }
    }

    #[test]
    fn zero_output_gives_zero_kernel() {
        let g = grid(15);
        let mut rng = Lcg(1);
        let x = rng.sample(&g, 10);
        let y = FunctionalSample::from_rows(grid(9), &vec![vec![0.0; 9]; 10]).unwrap();
        let m = fit(&x, &y, 3, RegularizationScheme::SpectralCut).unwrap();
        assert_eq!(m.kernel().kernel().amax(), 0.0);
        assert_eq!(m.sigma2_eps(), 0.0);
    }

    #[test]
    fn identity_response_recovers_projector() {
        let g = grid(21);
        let mut rng = Lcg(7);
        let x = rng.sample(&g, 30);
        for k in [1, 4, 9] {
            let design = Design::new(&x, &x).unwrap();
            let m = design.fit(k, RegularizationScheme::SpectralCut).unwrap();
            let pi = projector(design.eigensystem(), k).unwrap();
            assert!((m.kernel().kernel() - pi.kernel()).amax() < 1e-8);
            let x_new = Curve::from_fn(g.clone(), |t| (5.0 * t).cos()).unwrap();
            let yhat = predict(&m, &x_new).unwrap();
            let expected = apply(&pi, &x_new.sub(m.mean_x()).unwrap())
                .unwrap()
                .add(m.mean_x())
                .unwrap();
            for (a, b) in yhat.values().iter().zip(expected.values()) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_orthogonal_inputs_hand_sum() {
        // X_1 = u, X_2 = −u are colinear after centering; use four curves ±u, ±v
        let g = grid(33);
        let u = Curve::from_fn(g.clone(), |_| 1.0).unwrap();
        let v0 = Curve::from_fn(g.clone(), |t| t - 0.5).unwrap();
        let v = v0.scale(1.0 / norm(&v0));
        let xs = [u.clone(), u.scale(-1.0), v.clone(), v.scale(-1.0)];
        let gy = grid(5);
        let a = Curve::from_fn(gy.clone(), |t| 1.0 + t).unwrap();
        let b = Curve::from_fn(gy.clone(), |t| t * t).unwrap();
        let ys = [a.clone(), a.scale(-1.0), b.clone(), b.scale(-1.0)];
        let x = FunctionalSample::from_curves(g.clone(), &xs).unwrap();
        let y = FunctionalSample::from_curves(gy.clone(), &ys).unwrap();
        let m = fit(&x, &y, 2, RegularizationScheme::SpectralCut).unwrap();
        // Γ_n = (u⊗u + v⊗v)/2, eigenvalues 1/2 with e = u, v up to sign and rotation
        // within the tie; the estimator is rotation-invariant: Ŝ = a⊗u + b⊗v.
        let expected = DMatrix::from_fn(5, 33, |q, p| {
            a.values()[q] * u.values()[p] + b.values()[q] * v.values()[p]
        });
        assert!((m.kernel().kernel() - expected).amax() < 1e-10);
        assert!(m.sigma2_eps() < 1e-20);
    }

    #[test]
    fn kernel_paths_agree_on_random_instances() {
        for seed in 0..20u64 {
            let mut rng = Lcg(seed + 100);
            let n = 3 + (seed as usize % 18);
            let p = 5 + (seed as usize * 7 % 27);
            let gx = grid(p);
            let gy = grid(4 + seed as usize % 9);
            let x = rng.sample(&gx, n);
            let y = rng.sample(&gy, n);
            let d = Design::new(&x, &y).unwrap();
            for k in 1..=d.eigensystem().rank().min(4) {
                for scheme in [
                    RegularizationScheme::SpectralCut,
                    RegularizationScheme::Ridge { alpha: 0.01 },
                    RegularizationScheme::Tikhonov { alpha: 0.01 },
                ] {
                    let a = d.estimate(k, scheme).unwrap();
                    let b = d.estimate_from_scores(k, scheme).unwrap();
                    assert!((a.kernel() - b.kernel()).amax() < 1e-8, "seed {seed} k {k}");
                }
            }
        }
    }

    #[test]
    fn prediction_paths_agree_and_are_linear() {
        let g = grid(25);
        let mut rng = Lcg(42);
        let x = rng.sample(&g, 40);
        let y = rng.sample(&grid(11), 40);
        let d = Design::new(&x, &y).unwrap();
        let scheme = RegularizationScheme::SpectralCut;
        let m = d.fit(5, scheme).unwrap();
        let x1 = Curve::from_fn(g.clone(), |t| (3.0 * t).sin()).unwrap();
        let x2 = Curve::from_fn(g.clone(), |t| t * t - 0.2).unwrap();
        let p1 = predict(&m, &x1).unwrap();
        let q1 = d.predict_from_scores(5, scheme, &x1).unwrap();
        assert!(p1.values().iter().zip(q1.values()).all(|(a, b)| (a - b).abs() < 1e-10));

        let (a, b) = (0.7, -1.3);
        let mix = x1
            .combine(a, &x2, b)
            .unwrap()
            .combine(1.0, m.mean_x(), 1.0 - a - b)
            .unwrap();
        let lhs = predict(&m, &mix).unwrap().sub(m.mean_y()).unwrap();
        let c1 = p1.sub(m.mean_y()).unwrap();
        let c2 = predict(&m, &x2).unwrap().sub(m.mean_y()).unwrap();
        let rhs = c1.combine(a, &c2, b).unwrap();
        assert!(lhs.values().iter().zip(rhs.values()).all(|(u, v)| (u - v).abs() < 1e-10));
    }

    #[test]
    fn orthogonal_input_predicts_mean() {
        let g = grid(25);
        let mut rng = Lcg(5);
        let x = rng.sample(&g, 30);
        let y = rng.sample(&grid(8), 30);
        let m = fit(&x, &y, 3, RegularizationScheme::SpectralCut).unwrap();
        // remove the first three eigen-directions from an arbitrary curve
        let mut z = Curve::from_fn(g.clone(), |t| (7.0 * t).cos()).unwrap();
        for j in 0..3 {
            let e = m.eigensystem().eigenfunction(j);
            let c = inner_product(&z, &e).unwrap();
            z = z.combine(1.0, &e, -c).unwrap();
        }
        let yhat = predict(&m, &z.add(m.mean_x()).unwrap()).unwrap();
        assert!(yhat.values().iter().zip(m.mean_y().values()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn kernel_lies_in_span_of_first_k_eigenfunctions() {
        let g = grid(19);
        let mut rng = Lcg(9);
        let x = rng.sample(&g, 25);
        let y = rng.sample(&grid(7), 25);
        let d = Design::new(&x, &y).unwrap();
        let s = d.estimate(4, RegularizationScheme::SpectralCut).unwrap();
        let pi = projector(d.eigensystem(), 4).unwrap();
        let projected = compose(&s, &pi).unwrap();
        assert!((projected.kernel() - s.kernel()).amax() < 1e-10);
    }

    #[test]
    fn residual_paths_and_noise_trace() {
        let g = grid(17);
        let mut rng = Lcg(3);
        let x = rng.sample(&g, 12);
        let y = rng.sample(&grid(6), 12);
        let d = Design::new(&x, &y).unwrap();
        let rank = d.eigensystem().rank();
        let m = d.fit(rank, RegularizationScheme::SpectralCut).unwrap();
        let r = residuals(&m, &x, &y).unwrap();
        let direct: f64 = (0..x.len())
            .map(|i| {
                let diff = predict(&m, &x.row(i)).unwrap().sub(&y.row(i)).unwrap();
                norm(&diff).powi(2)
            })
            .sum::<f64>()
            / x.len() as f64;
        let from_resid: f64 = r.rows().map(|e| norm(&e).powi(2)).sum::<f64>() / x.len() as f64;
        assert!((direct - from_resid).abs() < 1e-12);
        assert!((m.sigma2_eps() - trace(m.noise_covariance()).unwrap()).abs() < 1e-10);
        assert!((m.sigma2_eps() - from_resid).abs() < 1e-10);

        let zero = FunctionalSample::from_rows(grid(6), &vec![vec![0.0; 6]; 4]).unwrap();
        let (cov, s2) = noise_covariance(&zero).unwrap();
        assert_eq!(cov.kernel().amax(), 0.0);
        assert_eq!(s2, 0.0);
    }

    #[test]
    fn predictions_invariant_under_row_order_and_sign_flips() {
        let g = grid(21);
        let mut rng = Lcg(77);
        let x = rng.sample(&g, 30);
        let y = rng.sample(&grid(9), 30);
        let order: Vec<usize> = (0..30).rev().collect();
        let m1 = fit(&x, &y, 4, RegularizationScheme::SpectralCut).unwrap();
        let m2 = fit(&x.select(&order), &y.select(&order), 4, RegularizationScheme::SpectralCut).unwrap();
        let x_new = Curve::from_fn(g.clone(), |t| t.sqrt()).unwrap();
        let p1 = predict(&m1, &x_new).unwrap();
        let p2 = predict(&m2, &x_new).unwrap();
        assert!(p1.values().iter().zip(p2.values()).all(|(a, b)| (a - b).abs() < 1e-10));

        let d = Design::new(&x, &y).unwrap();
        let flipped = Design {
            eig: d.eigensystem().with_flipped_sign(0).with_flipped_sign(2),
            ..d.clone()
        };
        let a = d.predict_from_scores(4, RegularizationScheme::SpectralCut, &x_new).unwrap();
        let b = flipped
            .predict_from_scores(4, RegularizationScheme::SpectralCut, &x_new)
            .unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(u, v)| (u - v).abs() < 1e-12));
    }

    #[test]
    fn fit_errors() {
        let g = grid(9);
        let mut rng = Lcg(1);
        let x = rng.sample(&g, 5);
        let y = rng.sample(&g, 6);
        assert!(matches!(fit(&x, &y, 1, RegularizationScheme::SpectralCut), Err(Error::Dimension(_))));
        let y = rng.sample(&g, 5);
        assert!(matches!(
            fit(&x, &y, 5, RegularizationScheme::SpectralCut),
            Err(Error::CutExceedsRank { k: 5, max_k: 4 })
        ));
        let same = FunctionalSample::from_rows(g.clone(), &vec![vec![1.0; 9]; 5]).unwrap();
        assert!(matches!(fit(&same, &y, 1, RegularizationScheme::SpectralCut), Err(Error::RankZero)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = Lcg(12);
        let x = rng.sample(&grid(13), 20);
        let y = rng.sample(&grid(8), 20);
        let m = fit(&x, &y, 3, RegularizationScheme::Tikhonov { alpha: 0.05 }).unwrap();
        let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.kernel().kernel(), m.kernel().kernel());
        assert_eq!(back.noise_covariance().kernel(), m.noise_covariance().kernel());
        assert_eq!(back.eigensystem().functions(), m.eigensystem().functions());
        assert_eq!(back.eigensystem().eigenvalues(), m.eigensystem().eigenvalues());
        assert_eq!(back.sigma2_eps(), m.sigma2_eps());
        assert_eq!(back.scheme(), m.scheme());
        assert_eq!((back.k(), back.n()), (3, 20));
        let x_new = x.row(0);
        assert_eq!(predict(&back, &x_new).unwrap().values(), predict(&m, &x_new).unwrap().values());
    }
}
