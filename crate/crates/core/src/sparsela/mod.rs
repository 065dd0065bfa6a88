//! Sparse storage and the small amount of linear algebra the solvers need.

mod csr;
mod dense;
mod lsq;
mod spectral;

pub use csr::{RowBlockView, SparseMatrix};
pub use dense::{
    singular_values, smallest_nonzero_singular_value_sq, DenseCap, DenseFactorization,
    DENSE_CAP_ENV, SINGULAR_VALUE_RTOL,
};
pub use lsq::{least_squares_apply, LsqConfig, LsqOutcome};
pub use spectral::{spectral_norm_sq, SpectralEstimate, POWER_MAX_ITER, POWER_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) lies outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("row index {index} outside 0..{nrows}")]
    RowOutOfRange { index: usize, nrows: usize },
    #[error("row index {index} appears twice in a block")]
    DuplicateRow { index: usize },
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("operation needs a nonzero matrix")]
    ZeroMatrix,
    #[error("matrix is {nrows}x{ncols}; dense diagnostics are capped at min(m, n) <= {cap} (set {env} to override)", env = DENSE_CAP_ENV)]
    TooLargeForDense {
        nrows: usize,
        ncols: usize,
        cap: usize,
    },
    #[error("invalid least-squares configuration: {0}")]
    InvalidConfig(String),
}

/// Euclidean dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn check_len(expected: usize, actual: usize) -> Result<(), LinalgError> {
    if expected == actual {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, actual })
    }
}
