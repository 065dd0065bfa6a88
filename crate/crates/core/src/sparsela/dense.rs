//! Dense factorizations used for diagnostics: singular values, paving bounds, least-norm
//! reference solutions. Guarded by a size cap since they densify the matrix.

use nalgebra::{DMatrix, DVector, SVD};

use super::{check_len, LinalgError, SparseMatrix};

/// Environment variable overriding [`DenseCap::DEFAULT`].
pub const DENSE_CAP_ENV: &str = "KLAB_DENSE_CAP";

/// Singular values below this fraction of the largest are treated as zero.
pub const SINGULAR_VALUE_RTOL: f64 = 1e-12;

/// Upper limit on `min(m, n)` for routines that densify a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseCap(pub usize);

impl DenseCap {
    pub const DEFAULT: DenseCap = DenseCap(2000);

    pub fn unlimited() -> Self {
        DenseCap(usize::MAX)
    }

    /// [`DenseCap::DEFAULT`] unless `KLAB_DENSE_CAP` holds a positive integer.
    pub fn from_env() -> Self {
        match std::env::var(DENSE_CAP_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(cap) if cap > 0 => DenseCap(cap),
                _ => {
                    log::warn!("ignoring {DENSE_CAP_ENV}={v:?}: expected a positive integer");
                    Self::DEFAULT
                }
            },
            Err(_) => Self::DEFAULT,
        }
    }

    pub fn allows(&self, nrows: usize, ncols: usize) -> bool {
        nrows.min(ncols) <= self.0
    }

    pub fn check(&self, nrows: usize, ncols: usize) -> Result<(), LinalgError> {
        if self.allows(nrows, ncols) {
            Ok(())
        } else {
            Err(LinalgError::TooLargeForDense {
                nrows,
                ncols,
                cap: self.0,
            })
        }
    }
}

impl Default for DenseCap {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// All `min(m, n)` singular values, descending.
pub fn singular_values(dense: DMatrix<f64>) -> Vec<f64> {
    if dense.nrows() == 0 || dense.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = dense.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `sigma_min(A)^2` over nonzero singular values (relative cutoff
/// [`SINGULAR_VALUE_RTOL`]), from a dense SVD.
pub fn smallest_nonzero_singular_value_sq(
    a: &SparseMatrix,
    cap: DenseCap,
) -> Result<f64, LinalgError> {
    cap.check(a.nrows(), a.ncols())?;
    let s = singular_values(a.to_dense());
    smallest_nonzero(&s)
        .map(|v| v * v)
        .ok_or(LinalgError::ZeroMatrix)
}

pub(crate) fn smallest_nonzero(sorted_desc: &[f64]) -> Option<f64> {
    let max = *sorted_desc.first()?;
    if max == 0.0 {
        return None;
    }
    sorted_desc
        .iter()
        .rev()
        .copied()
        .find(|&s| s > SINGULAR_VALUE_RTOL * max)
}

/// Thin SVD of a densified matrix, kept around for repeated least-norm solves.
pub struct DenseFactorization {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    sigma: Vec<f64>,
    nrows: usize,
    ncols: usize,
}

impl std::fmt::Debug for DenseFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseFactorization")
            .field("nrows", &self.nrows)
            .field("ncols", &self.ncols)
            .field("rank", &self.rank())
            .finish()
    }
}

impl DenseFactorization {
    pub fn new(a: &SparseMatrix, cap: DenseCap) -> Result<Self, LinalgError> {
        cap.check(a.nrows(), a.ncols())?;
        if a.frobenius_norm_sq() == 0.0 {
            return Err(LinalgError::ZeroMatrix);
        }
        let svd = a.to_dense().svd(true, true);
        let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        sigma.sort_by(|x, y| y.total_cmp(x));
        Ok(Self {
            svd,
            sigma,
            nrows: a.nrows(),
            ncols: a.ncols(),
        })
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma[0] * self.sigma[0]
    }

    pub fn sigma_min_nonzero_sq(&self) -> f64 {
        let s = smallest_nonzero(&self.sigma).expect("nonzero matrix");
        s * s
    }

    pub fn rank(&self) -> usize {
        let cut = SINGULAR_VALUE_RTOL * self.sigma[0];
        self.sigma.iter().filter(|&&s| s > cut).count()
    }

    /// `sigma_max / sigma_min` over all `min(m, n)` singular values; infinite when the
    /// smallest is exactly zero.
    pub fn condition_number(&self) -> f64 {
        let min = *self.sigma.last().expect("nonempty");
        if min == 0.0 {
            f64::INFINITY
        } else {
            self.sigma[0] / min
        }
    }

    /// `A^+ b`, the minimum-norm least-squares solution.
    pub fn min_norm_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.nrows, b.len())?;
        let eps = SINGULAR_VALUE_RTOL * self.sigma[0];
        let x = self
            .svd
            .solve(&DVector::from_column_slice(b), eps)
            .expect("u and v were computed");
        Ok(x.iter().copied().collect())
    }
}
