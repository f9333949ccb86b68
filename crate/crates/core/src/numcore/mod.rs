//! Dense small-matrix kernels: spectral abscissa, positivity predicates,
//! Lyapunov solves, cone-vector linear programs and signed weight splits.
//!
//! Everything here is a pure function of its inputs.

mod cone;
mod eigen;
mod linalg;
pub mod lp;
mod lyapunov;
mod matrix;

pub use cone::{cone_vector_max_ratio, ConeVector, RATIO_TOL};
pub use eigen::{eigenvalues, spectral_abscissa};
pub use linalg::{
    cholesky, lu_solve, orthant_ellipsoid_max, symmetric_eigen_min, ORTHANT_ENUMERATION_MAX_DIM,
};
pub use lyapunov::{lyapunov_residual, lyapunov_solve};
pub use matrix::Matrix;

use thiserror::Error;

/// Default Metzler tolerance. Off-diagonal signs are exact.
pub const METZLER_TOL: f64 = 0.0;
/// Default strict Hurwitz margin.
pub const HURWITZ_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("{op}: dimension mismatch, left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("eigenvalue iteration did not converge after {iterations} sweeps (subdiagonal residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is singular (pivot {pivot:e})")]
    Singular { pivot: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Lyapunov equation has no solution: spectral abscissa {abscissa} is not negative")]
    NotHurwitz { abscissa: f64 },
    #[error("Lyapunov residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
    #[error("no strictly positive vector with v^T M <= -{slack:e} exists")]
    ConeInfeasible { slack: f64 },
}

/// True iff every off-diagonal entry of `m` is at least `-tol`.
pub fn is_metzler(m: &Matrix, tol: f64) -> Result<bool, NumError> {
    let n = m.require_square("is_metzler")?;
    Ok((0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= -tol)))
}

/// First off-diagonal entry below `-tol`, for error messages.
pub fn metzler_violation(m: &Matrix, tol: f64) -> Option<(usize, usize)> {
    let n = m.rows().min(m.cols());
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| i != j && m[(i, j)] < -tol)
}

/// True iff the spectral abscissa of `m` is below `-margin`.
pub fn is_hurwitz(m: &Matrix, margin: f64) -> Result<bool, NumError> {
    Ok(spectral_abscissa(m)? < -margin)
}

pub fn is_nonnegative(m: &Matrix) -> bool {
    m.as_slice().iter().all(|&v| v >= 0.0)
}

/// Splits `w` into its positive and negative parts, `w = w_plus + w_minus`.
pub fn signed_split(w: &Matrix) -> (Matrix, Matrix) {
    (w.map(|v| v.max(0.0)), w.map(|v| v.min(0.0)))
}
