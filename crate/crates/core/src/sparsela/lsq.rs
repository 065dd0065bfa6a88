//! CGLS on a row block: applies `A_V^+` to a vector without forming the pseudo-inverse.

use super::{axpy, check_len, norm_sq, LinalgError, RowBlockView};

/// Stopping rule for the inner block solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqConfig {
    /// Target for `||A_V^T (r - A_V z)|| / ||A_V^T r||`.
    pub rel_tolerance: f64,
    /// Iteration cap; `None` means `4 * |V|`.
    pub max_inner_iterations: Option<usize>,
}

impl Default for LsqConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-12,
            max_inner_iterations: None,
        }
    }
}

impl LsqConfig {
    pub fn validate(&self) -> Result<(), LinalgError> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(LinalgError::InvalidConfig(format!(
                "rel_tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_inner_iterations == Some(0) {
            return Err(LinalgError::InvalidConfig(
                "max_inner_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, block_rows: usize) -> usize {
        self.max_inner_iterations
            .unwrap_or_else(|| 4 * block_rows.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final recursive normal-equation residual relative to `||A_V^T r||`.
    pub rel_normal_residual: f64,
}

/// Minimum-norm least-squares solution of `A_V z = r` by CGLS started from zero.
///
/// Starting from zero keeps every iterate in the row space of `A_V`, so the limit is
/// `A_V^+ r`. Non-convergence is reported through [`LsqOutcome::converged`]; the best
/// iterate is still returned.
pub fn least_squares_apply(
    block: &RowBlockView<'_>,
    rhs: &[f64],
    cfg: &LsqConfig,
) -> Result<LsqOutcome, LinalgError> {
    cfg.validate()?;
    check_len(block.len(), rhs.len())?;
    let n = block.ncols();
    let mut z = vec![0.0; n];
    let mut res = rhs.to_vec();
    let mut s = vec![0.0; n];
    block.apply_transpose_into(&res, &mut s);
    let mut gamma = norm_sq(&s);
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return Ok(LsqOutcome {
            solution: z,
            iterations: 0,
            converged: true,
            rel_normal_residual: 0.0,
        });
    }
    let target = cfg.rel_tolerance * cfg.rel_tolerance * gamma0;
    let cap = cfg.iteration_cap(block.len());

    let mut p = s.clone();
    let mut q = vec![0.0; block.len()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cap {
        block.apply_into(&p, &mut q);
        let delta = norm_sq(&q);
        if delta == 0.0 {
            break;
        }
        let step = gamma / delta;
        axpy(step, &p, &mut z);
        axpy(-step, &q, &mut res);
        block.apply_transpose_into(&res, &mut s);
        let gamma_next = norm_sq(&s);
        iterations += 1;
        if gamma_next <= target {
            gamma = gamma_next;
            converged = true;
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Ok(LsqOutcome {
        solution: z,
        iterations,
        converged,
        rel_normal_residual: (gamma / gamma0).sqrt(),
    })
}
