//! Runtime checks of the per-step contraction bounds of MRBK and MRABK.

use super::HarnessError;
use crate::partition::{convergence_factors, PavingBounds};
use crate::solvers::{Method, MethodKind, SolveReport};

/// Additive slack on each observed ratio.
pub const BOUND_SLACK: f64 = 1e-10;

/// Steps whose starting error is at or below this are skipped (their ratio is noise).
const MIN_ERROR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    /// Zero-based step index `k` (the ratio compares `x_{k+1}` with `x_k`).
    pub step: usize,
    pub ratio: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub method: MethodKind,
    /// Factor applied to the first step.
    pub first_factor: f64,
    /// Factor applied to every later step.
    pub steady_factor: f64,
    /// Largest ratio over checked steps; 0 when none was checked.
    pub max_ratio: f64,
    pub steps_checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares every `||x_{k+1} - x*||^2 / ||x_k - x*||^2` in `report` with the MRBK or
/// MRABK contraction factor derived from `bounds`.
pub fn verify_theorem_bounds(
    report: &SolveReport,
    bounds: &PavingBounds,
    method: &Method,
) -> Result<BoundCheck, HarnessError> {
    let weight = match method.kind {
        MethodKind::Mrbk => 1.0,
        MethodKind::Mrabk => {
            let w = method.omega.unwrap_or(1.0);
            2.0 * w - w * w
        }
        other => {
            return Err(HarnessError::InvalidSpec(format!(
                "no per-step bound is checked for {other}"
            )))
        }
    };
    let partition = method
        .partition
        .as_ref()
        .ok_or_else(|| HarnessError::InvalidSpec("method has no partition".into()))?;
    let errors = report
        .squared_errors()
        .ok_or(HarnessError::MissingSolution)?;
    let factors = convergence_factors(bounds, partition, method.omega.unwrap_or(1.0));
    let first_factor = factors.first_step(weight);
    let steady_factor = factors.steady_step(weight);

    let mut check = BoundCheck {
        method: method.kind,
        first_factor,
        steady_factor,
        max_ratio: 0.0,
        steps_checked: 0,
        violations: Vec::new(),
    };
    for (k, pair) in errors.windows(2).enumerate() {
        if pair[0] <= MIN_ERROR {
            continue;
        }
        let ratio = pair[1] / pair[0];
        let factor = if k == 0 { first_factor } else { steady_factor };
        check.steps_checked += 1;
        check.max_ratio = check.max_ratio.max(ratio);
        if ratio > factor + BOUND_SLACK {
            check.violations.push(BoundViolation {
                step: k,
                ratio,
                factor,
            });
        }
    }
    Ok(check)
}
