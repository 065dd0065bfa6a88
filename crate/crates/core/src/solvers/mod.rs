//! The Kaczmarz family and the iteration driver.
//!
//! Every method starts from `x_0 = 0` (which lies in the row space of `A`) and recomputes
//! the residual `b - A x_k` from scratch at every iteration where it needs one.

mod steps;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::partition::Partition;
use crate::rng::{stream, Stream};
use crate::sparsela::{check_len, norm_sq, LinalgError, LsqConfig, SparseMatrix};

pub use steps::{
    block_residual_norms_sq, classic_kaczmarz_step, gbk_step, greedy_block_candidates,
    greedy_row_candidates, grbk_step, grk_step, mrabk_step, mrbk_step, mrk_step, rbk_step,
    residual, rk_step, select_max_block, GbkStep, MrabkStep, Step,
};

/// Relative slack applied to greedy threshold comparisons so that rows sitting exactly on
/// the threshold are not dropped by rounding.
pub const GREEDY_THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid method configuration: {0}")]
    InvalidMethod(String),
    #[error("invalid stopping rule: {0}")]
    InvalidStopRule(String),
    #[error("system marked consistent but ||A x* - b|| = {residual:e} exceeds 1e-8 ||b|| = {limit:e}")]
    NotConsistent { residual: f64, limit: f64 },
    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("nothing to select from")]
    EmptySelection,
    #[error("block {block} has residual {residual:e} but A_V^T r = 0; the system is inconsistent")]
    Inconsistent { block: usize, residual: f64 },
    #[error("inner least-squares solve did not converge after {iterations} iterations (relative normal residual {rel:e})")]
    InnerFailure { iterations: usize, rel: f64 },
}

/// `A x = b` with an optional known least-norm solution.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: Arc<SparseMatrix>,
    b: Vec<f64>,
    x_star: Option<Vec<f64>>,
    consistent: bool,
}

impl LinearSystem {
    /// When `consistent` is set and `x_star` is given, `||A x_star - b|| <= 1e-8 ||b||` is
    /// checked.
    pub fn new(
        a: Arc<SparseMatrix>,
        b: Vec<f64>,
        x_star: Option<Vec<f64>>,
        consistent: bool,
    ) -> Result<Self, SolveError> {
        check_len(a.nrows(), b.len())?;
        if let Some(xs) = &x_star {
            check_len(a.ncols(), xs.len())?;
            if consistent {
                let ax = a.spmv(xs)?;
                let res = ax
                    .iter()
                    .zip(&b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                let limit = 1e-8 * norm_sq(&b).sqrt();
                if res > limit {
                    return Err(SolveError::NotConsistent {
                        residual: res,
                        limit,
                    });
                }
            }
        }
        Ok(Self {
            a,
            b,
            x_star,
            consistent,
        })
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn shared_matrix(&self) -> &Arc<SparseMatrix> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Kaczmarz,
    Rk,
    Mrk,
    Grk,
    Rbk,
    Gbk,
    Grbk,
    Mrbk,
    Mrabk,
}

impl MethodKind {
    pub const ALL: [MethodKind; 9] = [
        MethodKind::Kaczmarz,
        MethodKind::Rk,
        MethodKind::Mrk,
        MethodKind::Grk,
        MethodKind::Rbk,
        MethodKind::Gbk,
        MethodKind::Grbk,
        MethodKind::Mrbk,
        MethodKind::Mrabk,
    ];

    /// Methods that operate on the blocks of a fixed partition.
    pub fn needs_partition(self) -> bool {
        matches!(
            self,
            MethodKind::Rbk | MethodKind::Grbk | MethodKind::Mrbk | MethodKind::Mrabk
        )
    }

    /// Methods that apply a block pseudo-inverse through CGLS.
    pub fn uses_inner_solve(self) -> bool {
        matches!(
            self,
            MethodKind::Rbk | MethodKind::Gbk | MethodKind::Grbk | MethodKind::Mrbk
        )
    }

    /// Methods whose row or block selection reads the whole residual.
    pub fn uses_full_residual(self) -> bool {
        !matches!(self, MethodKind::Kaczmarz | MethodKind::Rk | MethodKind::Rbk)
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Kaczmarz => "kaczmarz",
            MethodKind::Rk => "rk",
            MethodKind::Mrk => "mrk",
            MethodKind::Grk => "grk",
            MethodKind::Rbk => "rbk",
            MethodKind::Gbk => "gbk",
            MethodKind::Grbk => "grbk",
            MethodKind::Mrbk => "mrbk",
            MethodKind::Mrabk => "mrabk",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Kaczmarz => "Kaczmarz",
            MethodKind::Rk => "RK",
            MethodKind::Mrk => "MRK",
            MethodKind::Grk => "GRK",
            MethodKind::Rbk => "RBK",
            MethodKind::Gbk => "GBK",
            MethodKind::Grbk => "GRBK",
            MethodKind::Mrbk => "MRBK",
            MethodKind::Mrabk => "MRABK",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| {
                let names: Vec<&str> = MethodKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown method `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A method together with everything it needs to run.
#[derive(Debug, Clone)]
pub struct Method {
    pub kind: MethodKind,
    /// Relaxation for MRABK, in `(0, 2)`.
    pub omega: Option<f64>,
    pub partition: Option<Arc<Partition>>,
    pub lsq: LsqConfig,
}

impl Method {
    /// A row method (no partition, no relaxation).
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            omega: None,
            partition: None,
            lsq: LsqConfig::default(),
        }
    }

    pub fn with_partition(kind: MethodKind, partition: Arc<Partition>) -> Self {
        Self {
            partition: Some(partition),
            ..Self::new(kind)
        }
    }

    pub fn mrbk(partition: Arc<Partition>) -> Self {
        Self::with_partition(MethodKind::Mrbk, partition)
    }

    pub fn mrabk(partition: Arc<Partition>, omega: f64) -> Self {
        Self {
            omega: Some(omega),
            ..Self::with_partition(MethodKind::Mrabk, partition)
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: String| Err(SolveError::InvalidMethod(msg));
        if self.kind.needs_partition() && self.partition.is_none() {
            return bad(format!("{} needs a row partition", self.kind));
        }
        match (self.kind, self.omega) {
            (MethodKind::Mrabk, Some(w)) if w > 0.0 && w < 2.0 => {}
            (MethodKind::Mrabk, Some(w)) => return bad(format!("omega = {w} is outside (0, 2)")),
            (MethodKind::Mrabk, None) => return bad("MRABK needs omega".into()),
            (_, Some(_)) => return bad(format!("omega only applies to MRABK, not {}", self.kind)),
            (_, None) => {}
        }
        self.lsq.validate()?;
        Ok(())
    }

    fn omega_value(&self) -> f64 {
        self.omega.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once `||x_k - x*||^2 / ||x*||^2` drops below this.
    pub rse_tol: f64,
    pub max_iterations: usize,
    /// Used instead of the RSE when no reference solution is known:
    /// stop once `||b - A x_k|| / ||b||` drops below this.
    pub residual_tol: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            rse_tol: 1e-6,
            max_iterations: 200_000,
            residual_tol: Some(1e-8),
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.rse_tol.is_nan() || self.rse_tol <= 0.0 {
            return Err(SolveError::InvalidStopRule("rse_tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidStopRule(
                "max_iterations must be at least 1".into(),
            ));
        }
        if matches!(self.residual_tol, Some(t) if t.is_nan() || t <= 0.0) {
            return Err(SolveError::InvalidStopRule(
                "residual_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    InnerFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::InnerFailure => "inner_failure",
        })
    }
}

/// One completed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Iteration count after the step (1-based).
    pub iteration: usize,
    /// RSE of the new iterate; NaN when no reference solution is known.
    pub rse: f64,
    /// 0-based row or block chosen by the step. For GBK, the row with the largest
    /// weighted residual (always a member of the projected row set).
    pub selected: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: MethodKind,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub initial_rse: f64,
    pub final_rse: f64,
    /// `||x*||^2`, for turning RSE values back into squared errors.
    pub x_star_norm_sq: Option<f64>,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
    pub inner_failure: Option<String>,
    pub solution: Vec<f64>,
}

impl SolveReport {
    /// `||x_k - x*||^2` for `k = 0..=iterations`.
    pub fn squared_errors(&self) -> Option<Vec<f64>> {
        let scale = self.x_star_norm_sq?;
        let scale = if scale > 0.0 { scale } else { 1.0 };
        Some(
            std::iter::once(self.initial_rse)
                .chain(self.trace.iter().map(|e| e.rse))
                .map(|r| r * scale)
                .collect(),
        )
    }
}

fn relative_error_sq(x: &[f64], x_star: &[f64], x_star_norm_sq: f64) -> f64 {
    let err: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    if x_star_norm_sq > 0.0 {
        err / x_star_norm_sq
    } else {
        err
    }
}

/// Runs `method` from `x_0 = 0` until the stopping rule fires.
///
/// `seed` drives the sampling stream of the randomized methods; deterministic methods
/// ignore it.
pub fn solve(
    sys: &LinearSystem,
    method: &Method,
    stop: &StopRule,
    seed: u64,
) -> Result<SolveReport, SolveError> {
    method.validate()?;
    stop.validate()?;
    if let Some(p) = &method.partition {
        p.check_rows(sys.a().nrows())
            .map_err(|e| SolveError::InvalidMethod(e.to_string()))?;
    }
    let a = sys.a();
    let (m, n) = (a.nrows(), a.ncols());
    let mut stepper = steps::Stepper::new(sys, method, stream(seed, Stream::Sampling))?;

    let x_star_norm_sq = sys.x_star().map(norm_sq);
    let b_norm = norm_sq(sys.b()).sqrt();
    let residual_tol = stop.residual_tol.unwrap_or(1e-8);
    let want_residual = method.kind.uses_full_residual() || sys.x_star().is_none();

    let mut x = vec![0.0; n];
    let mut r = vec![0.0; m];
    let rse_of = |x: &[f64]| match (sys.x_star(), x_star_norm_sq) {
        (Some(xs), Some(ns)) => relative_error_sq(x, xs, ns),
        _ => f64::NAN,
    };
    let mut trace = Vec::new();
    let mut inner_failure = None;
    let start = Instant::now();
    let initial_rse = rse_of(&x);
    let mut rse = initial_rse;
    let mut k = 0;
    let termination = loop {
        if want_residual {
            a.spmv_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(sys.b()) {
                *ri = bi - *ri;
            }
        }
        let done = if sys.x_star().is_some() {
            rse < stop.rse_tol
        } else {
            norm_sq(&r).sqrt() <= residual_tol * b_norm
        };
        if done || (want_residual && r.iter().all(|&v| v == 0.0)) {
            break Termination::Converged;
        }
        if k >= stop.max_iterations {
            break Termination::MaxIterations;
        }
        let selected = match stepper.step(&mut x, &r, k) {
            Ok(sel) => sel,
            Err(e @ SolveError::InnerFailure { .. }) => {
                inner_failure = Some(e.to_string());
                break Termination::InnerFailure;
            }
            Err(e) => return Err(e),
        };
        k += 1;
        rse = rse_of(&x);
        trace.push(TraceEntry {
            iteration: k,
            rse,
            selected,
            seconds: start.elapsed().as_secs_f64(),
        });
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(msg) = &inner_failure {
        log::warn!("{} stopped at iteration {k}: {msg}", method.kind);
    }
    Ok(SolveReport {
        method: method.kind,
        iterations: k,
        wall_seconds,
        initial_rse,
        final_rse: rse,
        x_star_norm_sq,
        trace,
        termination,
        inner_failure,
        solution: x,
    })
}
