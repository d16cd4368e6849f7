//! Dense and sparse kernels sized for desk-scale problems.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Matrices come in two layouts:
//! [`DenseMatrix`] (row-major) for verification-scale work and
//! [`SparseMatrix`] (compressed rows, ascending columns) for the operator.
//! Both implement [`LinearOperator`], which is all the iterative solvers need.

mod dense;
mod eig;
mod factor;
mod orth;
mod sparse;
mod svd;

pub use dense::DenseMatrix;
pub use eig::{dense_eig, Eigendecomposition};
pub use factor::{factor_small, lu_solve, solve_small, SmallFactor};
pub use orth::{mgs_orthonormalize, orthogonalize_against, principal_angles, Orthonormalized};
pub use sparse::SparseMatrix;
pub use svd::{condition_number_2, singular_values, svd, Svd};

use crate::error::{DfpiError, Result};

/// A real matrix that can be applied to vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `y = A x`. Callers guarantee matching lengths.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `y = Aᵀ x`. Callers guarantee matching lengths.
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);

    /// `‖A − Aᵀ‖_F / ‖A‖_F` (0 for the zero matrix).
    fn symmetry_defect(&self) -> f64;

    fn to_dense(&self) -> DenseMatrix;

    /// Allocating `A x`; panics in debug builds on a length mismatch.
    fn mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols());
        let mut y = vec![0.0; self.nrows()];
        self.apply(x, &mut y);
        y
    }

    /// Allocating `Aᵀ x`.
    fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows());
        let mut y = vec![0.0; self.ncols()];
        self.apply_transpose(x, &mut y);
        y
    }

    /// Checked `A x`.
    fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols(), x.len())?;
        Ok(self.mul(x))
    }

    /// Checked `Aᵀ x`.
    fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nrows(), x.len())?;
        Ok(self.mul_transpose(x))
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(DfpiError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    // scaled to avoid overflow on diverging iterations
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return if scale.is_nan() { f64::NAN } else { scale };
    }
    let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// `Σ coeffs[k] · columns[k]`, of length `n`.
pub fn combine(columns: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (c, col) in coeffs.iter().zip(columns) {
        axpy(*c, col, &mut out);
    }
    out
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
