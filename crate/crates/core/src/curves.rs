//! Discretized functions on `[0, 1]`.
//!
//! Every curve lives on a [`Grid`] carrying trapezoid quadrature weights, so the
//! `L²` inner product `∫ f g` becomes the weighted sum `Σ_p w_p f(t_p) g(t_p)`.
//! Integral operators built on top of this module are therefore plain weighted
//! matrix algebra.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance used to accept a sample as centered.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

/// Strictly increasing points spanning `[0, 1]` with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit points. The first point must be 0, the last 1.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Domain(format!(
                "grid needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("grid points must be finite".into()));
        }
        if points[0] != 0.0 || points[points.len() - 1] != 1.0 {
            return Err(Error::Domain(format!(
                "grid must start at 0 and end at 1, got [{}, {}]",
                points[0],
                points[points.len() - 1]
            )));
        }
        if let Some(w) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "grid points must be strictly increasing (index {})",
                w + 1
            )));
        }
        let weights = trapezoid_weights(&points);
        Ok(Grid { points, weights })
    }

    /// Uniform grid with `size` points including both endpoints.
    pub fn uniform(size: usize) -> Result<Self> {
        if size < 3 {
            return Err(Error::Domain(format!(
                "grid needs at least 3 points, got {size}"
            )));
        }
        let last = (size - 1) as f64;
        let points = (0..size).map(|p| p as f64 / last).collect();
        Grid::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Convergence order of the quadrature rule on smooth integrands.
    pub fn quadrature_order(&self) -> u32 {
        2
    }

    /// Index `p` and fraction `a` such that `t = (1 - a) t_p + a t_{p+1}`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} lies outside [0, 1]")));
        }
        let last = self.points.len() - 1;
        let p = match self
            .points
            .binary_search_by(|x| x.partial_cmp(&t).expect("finite grid"))
        {
            Ok(p) => return Ok((p.min(last - 1), if p == last { 1.0 } else { 0.0 })),
            Err(p) => p - 1,
        };
        let frac = (t - self.points[p]) / (self.points[p + 1] - self.points[p]);
        Ok((p, frac))
    }

    pub(crate) fn same_as(self: &Arc<Self>, other: &Arc<Grid>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Trapezoid weights on an arbitrary strictly increasing grid.
pub fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|p| {
            if p == 0 {
                (points[1] - points[0]) / 2.0
            } else if p == n - 1 {
                (points[n - 1] - points[n - 2]) / 2.0
            } else {
                (points[p + 1] - points[p - 1]) / 2.0
            }
        })
        .collect()
}

pub(crate) fn ensure_same_grid(a: &Arc<Grid>, b: &Arc<Grid>, what: &str) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: grids differ ({} vs {} points)",
            a.len(),
            b.len()
        )))
    }
}

/// Values of a function at the points of a grid.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "curve has {} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("curve values must be finite".into()));
        }
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Curve { grid, values }
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation at `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (p, a) = self.grid.locate(t)?;
        Ok((1.0 - a) * self.values[p] + a * self.values[p + 1])
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Curve, b: f64) -> Result<Curve> {
        ensure_same_grid(&self.grid, &other.grid, "combine")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Curve::new(self.grid.clone(), values)
    }

    pub fn scale(&self, a: f64) -> Curve {
        Curve::from_parts(self.grid.clone(), self.values.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.combine(1.0, other, 1.0)
    }
}

/// Quadrature approximation of `∫₀¹ f g`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    ensure_same_grid(&f.grid, &g.grid, "inner_product")?;
    Ok(weighted_dot(f.grid.weights(), &f.values, &g.values))
}

pub fn norm(f: &Curve) -> f64 {
    weighted_dot(f.grid.weights(), &f.values, &f.values).sqrt()
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// `n` curves on a common grid, stored row-wise in an `n × P` matrix.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    data: DMatrix<f64>,
    centered: bool,
}

impl FunctionalSample {
    pub fn from_matrix(grid: Arc<Grid>, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "sample has {} columns on a {}-point grid",
                data.ncols(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample values must be finite".into()));
        }
        Ok(FunctionalSample {
            grid,
            data,
            centered: false,
        })
    }

    pub fn from_rows(grid: Arc<Grid>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = grid.len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {i} has {} values on a {p}-point grid",
                rows[i].len()
            )));
        }
        let data = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        FunctionalSample::from_matrix(grid, data)
    }

    pub fn from_curves(grid: Arc<Grid>, curves: &[Curve]) -> Result<Self> {
        for c in curves {
            ensure_same_grid(&grid, c.grid(), "from_curves")?;
        }
        let data = DMatrix::from_fn(curves.len(), grid.len(), |i, j| curves[i].values[j]);
        FunctionalSample::from_matrix(grid, data)
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, data: DMatrix<f64>, centered: bool) -> Self {
        FunctionalSample {
            grid,
            data,
            centered,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of curves.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn is_flagged_centered(&self) -> bool {
        self.centered
    }

    pub fn row(&self, i: usize) -> Curve {
        Curve::from_parts(self.grid.clone(), self.data.row(i).iter().copied().collect())
    }

    pub fn rows(&self) -> impl Iterator<Item = Curve> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Pointwise mean curve.
    pub fn mean(&self) -> Result<Curve> {
        if self.is_empty() {
            return Err(Error::Domain("mean of an empty sample".into()));
        }
        let n = self.len() as f64;
        let values = self.data.column_iter().map(|c| c.sum() / n).collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }

    /// True when flagged centered or numerically mean-zero.
    pub fn is_centered(&self) -> bool {
        if self.centered {
            return true;
        }
        let Ok(mean) = self.mean() else {
            return false;
        };
        let scale = self.data.amax().max(1.0);
        mean.values.iter().all(|m| m.abs() <= CENTERING_TOLERANCE * scale)
    }

    /// Subset of rows, in the order given.
    pub fn select(&self, indices: &[usize]) -> FunctionalSample {
        let data = self.data.select_rows(indices);
        FunctionalSample::from_parts(self.grid.clone(), data, false)
    }
}

/// Subtracts the pointwise mean from every curve.
///
/// Returns the centered sample (flagged as such) and the mean curve.
pub fn center(sample: &FunctionalSample) -> Result<(FunctionalSample, Curve)> {
    let mean = sample.mean()?;
    let mut data = sample.data.clone();
    for (j, mut col) in data.column_iter_mut().enumerate() {
        let m = mean.values[j];
        col.iter_mut().for_each(|v| *v -= m);
    }
    Ok((
        FunctionalSample::from_parts(sample.grid.clone(), data, true),
        mean,
    ))
}
