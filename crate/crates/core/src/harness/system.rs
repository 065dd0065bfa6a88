//! Consistent test systems `b = A x*` with their least-norm solutions.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::HarnessError;
use crate::rng::{stream, Stream};
use crate::solvers::LinearSystem;
use crate::sparsela::{
    least_squares_apply, DenseCap, DenseFactorization, LsqConfig, SparseMatrix,
};

enum Oracle {
    Dense(DenseFactorization),
    Iterative(LsqConfig),
}

/// Builds consistent systems over one matrix, factoring it at most once.
pub struct SystemFactory {
    a: Arc<SparseMatrix>,
    oracle: Oracle,
}

impl std::fmt::Debug for SystemFactory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let oracle = match &self.oracle {
            Oracle::Dense(_) => "dense",
            Oracle::Iterative(_) => "iterative",
        };
        f.debug_struct("SystemFactory")
            .field("nrows", &self.a.nrows())
            .field("ncols", &self.a.ncols())
            .field("oracle", &oracle)
            .finish()
    }
}

impl SystemFactory {
    /// Uses a dense SVD when `cap` allows it. Otherwise, with `iterative_fallback`, the
    /// least-norm solution comes from CGLS on the whole system at tolerance 1e-12;
    /// without it the cap error is returned.
    pub fn new(
        a: Arc<SparseMatrix>,
        cap: DenseCap,
        iterative_fallback: bool,
    ) -> Result<Self, HarnessError> {
        if a.nrows() == 0 || a.ncols() == 0 || a.nnz() == 0 {
            return Err(HarnessError::EmptyMatrix);
        }
        let oracle = if cap.allows(a.nrows(), a.ncols()) || !iterative_fallback {
            Oracle::Dense(DenseFactorization::new(&a, cap)?)
        } else {
            Oracle::Iterative(LsqConfig {
                rel_tolerance: 1e-12,
                max_inner_iterations: Some(20 * a.ncols().max(a.nrows()).max(100)),
            })
        };
        Ok(Self { a, oracle })
    }

    pub fn matrix(&self) -> &Arc<SparseMatrix> {
        &self.a
    }

    /// The dense factorization, when one was computed.
    pub fn factorization(&self) -> Option<&DenseFactorization> {
        match &self.oracle {
            Oracle::Dense(f) => Some(f),
            Oracle::Iterative(_) => None,
        }
    }

    /// Standard normal `x*` from the solution stream of `seed`.
    pub fn draw_solution(&self, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Stream::Solution);
        (0..self.a.ncols())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }

    /// `b = A x*` for a fresh `x*`, paired with the least-norm solution of `A x = b`.
    pub fn system(&self, seed: u64) -> Result<LinearSystem, HarnessError> {
        let x = self.draw_solution(seed);
        let b = self.a.spmv(&x)?;
        let x_star = self.least_norm(&b)?;
        Ok(LinearSystem::new(self.a.clone(), b, Some(x_star), true)?)
    }

    /// `A^+ b`.
    pub fn least_norm(&self, b: &[f64]) -> Result<Vec<f64>, HarnessError> {
        match &self.oracle {
            Oracle::Dense(f) => Ok(f.min_norm_solve(b)?),
            Oracle::Iterative(cfg) => {
                let out = least_squares_apply(&self.a.full_view(), b, cfg)?;
                if !out.converged {
                    log::warn!(
                        "least-norm reference stopped after {} CGLS iterations at relative normal residual {:e}",
                        out.iterations,
                        out.rel_normal_residual
                    );
                }
                Ok(out.solution)
            }
        }
    }
}

/// One consistent system over `a`; see [`SystemFactory`].
pub fn make_consistent_system(
    a: Arc<SparseMatrix>,
    seed: u64,
    cap: DenseCap,
    iterative_fallback: bool,
) -> Result<LinearSystem, HarnessError> {
    SystemFactory::new(a, cap, iterative_fallback)?.system(seed)
}
