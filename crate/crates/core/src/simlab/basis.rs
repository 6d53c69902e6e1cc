//! Orthonormal generator families on a grid.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curves::Grid;
use crate::error::{Error, Result};

/// Orthonormality tolerance for generator bases.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

/// Analytic family, re-orthonormalized in the quadrature inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `1, √2 cos(2πt), √2 sin(2πt), √2 cos(4πt), …`
    #[default]
    Fourier,
    /// `√2 sin(πjt)`, `j = 1, 2, …`
    Sine,
}

impl Basis {
    fn raw(self, j: usize, t: f64) -> f64 {
        match self {
            Basis::Fourier => {
                if j == 0 {
                    1.0
                } else {
                    let freq = j.div_ceil(2) as f64;
                    if j % 2 == 1 {
                        SQRT_2 * (2.0 * PI * freq * t).cos()
                    } else {
                        SQRT_2 * (2.0 * PI * freq * t).sin()
                    }
                }
            }
            Basis::Sine => SQRT_2 * (PI * (j + 1) as f64 * t).sin(),
        }
    }

    /// Largest number of functions generated on `grid`.
    ///
    /// Half the grid size keeps every frequency at four or more points per
    /// period, where the sampled functions stay well conditioned.
    pub fn max_size(grid: &Grid) -> usize {
        grid.len() / 2
    }

    /// `P × J` matrix whose columns are orthonormal in the weighted inner product.
    pub fn matrix(self, grid: &Grid, count: usize) -> Result<DMatrix<f64>> {
        let cap = Self::max_size(grid);
        if count == 0 || count > cap {
            return Err(Error::Domain(format!(
                "basis size {count} must lie in [1, {cap}] for a grid of {} points",
                grid.len()
            )));
        }
        let w = grid.weights();
        let mut m = DMatrix::from_fn(grid.len(), count, |p, j| self.raw(j, grid.points()[p]));
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for j in 0..count {
                for i in 0..j {
                    let c: f64 = (0..grid.len()).map(|p| w[p] * m[(p, i)] * m[(p, j)]).sum();
                    for p in 0..grid.len() {
                        m[(p, j)] -= c * m[(p, i)];
                    }
                }
                let norm: f64 = (0..grid.len()).map(|p| w[p] * m[(p, j)].powi(2)).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    return Err(Error::Numeric {
                        message: format!("basis function {j} is dependent on the previous ones"),
                        residual: norm,
                    });
                }
                m.column_mut(j).scale_mut(1.0 / norm);
            }
        }
        check_orthonormal(grid, &m)?;
        Ok(m)
    }
}

/// Largest deviation of `EᵀWE` from the identity.
pub fn orthonormality_error(grid: &Grid, basis: &DMatrix<f64>) -> f64 {
    let mut weighted = basis.clone();
    for (p, mut row) in weighted.row_iter_mut().enumerate() {
        row *= grid.weights()[p];
    }
    let gram = basis.transpose() * weighted;
    (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax()
}

pub fn check_orthonormal(grid: &Grid, basis: &DMatrix<f64>) -> Result<()> {
    if basis.nrows() != grid.len() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, grid has {} points",
            basis.nrows(),
            grid.len()
        )));
    }
    let err = orthonormality_error(grid, basis);
    if err > ORTHONORMALITY_TOLERANCE {
        return Err(Error::Precondition(format!(
            "basis is not orthonormal (max Gram deviation {err:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bases_are_orthonormal_and_close_to_analytic() {
        for p in [16, 64, 129] {
            let g = Grid::uniform(p).unwrap();
            for b in [Basis::Fourier, Basis::Sine] {
                let m = b.matrix(&g, Basis::max_size(&g)).unwrap();
                assert!(orthonormality_error(&g, &m) < 1e-12);
                // low modes barely move under re-orthonormalization
                let drift = (0..g.len())
                    .map(|i| (m[(i, 1)] - b.raw(1, g.points()[i])).abs())
                    .fold(0.0, f64::max);
                assert!(drift < 20.0 / (p * p) as f64, "{b:?} P={p}: {drift}");
            }
        }
    }

    #[test]
    fn size_limits() {
        let g = Grid::uniform(10).unwrap();
        assert!(Basis::Fourier.matrix(&g, 6).is_err());
        assert!(Basis::Fourier.matrix(&g, 0).is_err());
        let bad = DMatrix::from_element(10, 2, 1.0);
        assert!(matches!(check_orthonormal(&g, &bad), Err(Error::Precondition(_))));
    }
}
