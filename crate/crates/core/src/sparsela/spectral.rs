//! Power iteration on the normal operator `x -> A^T A x`.

use rand::Rng;

use super::{norm_sq, LinalgError, SparseMatrix};
use crate::rng::{stream, Stream};

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// Estimate of `sigma_max(A)^2`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates `||A||_2^2`.
///
/// Starts from the normalized all-ones vector and stops once the Rayleigh quotient changes
/// by less than `tol` relative to its value. If the all-ones vector is annihilated by `A`
/// the iteration restarts from a fixed pseudo-random vector, so the result is always
/// deterministic.
pub fn spectral_norm_sq(
    a: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralEstimate, LinalgError> {
    if a.frobenius_norm_sq() == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let n = a.ncols();
    let start = vec![1.0 / (n as f64).sqrt(); n];
    match power_iterate(a, start, tol, max_iter) {
        Some(est) => Ok(est),
        None => {
            let mut rng = stream(0, Stream::Sampling);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = norm_sq(&v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            Ok(power_iterate(a, v, tol, max_iter).unwrap_or(SpectralEstimate {
                value: 0.0,
                iterations: 0,
                converged: false,
            }))
        }
    }
}

/// Returns `None` when the start vector lies in the null space of `A`.
fn power_iterate(
    a: &SparseMatrix,
    mut v: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<SpectralEstimate> {
    let mut av = vec![0.0; a.nrows()];
    let mut prev = 0.0;
    let mut value = 0.0;
    for it in 1..=max_iter {
        a.spmv_into(&v, &mut av);
        value = norm_sq(&av);
        if it == 1 && value == 0.0 {
            return None;
        }
        let mut w = a.spmv_transpose(&av).expect("dimensions match");
        let wn = norm_sq(&w).sqrt();
        if wn == 0.0 {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if it > 1 && (value - prev).abs() < tol * value {
            return Some(SpectralEstimate {
                value,
                iterations: it,
                converged: true,
            });
        }
        prev = value;
    }
    Some(SpectralEstimate {
        value,
        iterations: max_iter,
        converged: false,
    })
}
