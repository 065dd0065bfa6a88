//! Selection and update rules of the individual methods.
//!
//! The public `*_step` functions are pure: they take the current iterate, compute whatever
//! residual they need and return the next iterate. The driver uses [`Stepper`], which works
//! in place on a residual it has already computed.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{LinearSystem, Method, MethodKind, SolveError, GREEDY_THRESHOLD_SLACK};
use crate::partition::Partition;
use crate::rng::ChaCha8Rng;
use crate::sparsela::{
    axpy, check_len, least_squares_apply, norm_sq, LsqConfig, RowBlockView, SparseMatrix,
};

/// Result of a single-row or single-block step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub x: Vec<f64>,
    /// 0-based row or block index.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrabkStep {
    pub x: Vec<f64>,
    pub selected: usize,
    /// Extrapolated step size `alpha_k`.
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbkStep {
    pub x: Vec<f64>,
    /// Rows projected onto, ascending.
    pub rows: Vec<usize>,
}

/// `b - A x`
pub fn residual(sys: &LinearSystem, x: &[f64]) -> Result<Vec<f64>, SolveError> {
    let ax = sys.a().spmv(x)?;
    Ok(sys.b().iter().zip(&ax).map(|(b, p)| b - p).collect())
}

/// `||b_{V_i} - A_{V_i} x||^2` for every block.
pub fn block_residual_norms_sq(
    sys: &LinearSystem,
    x: &[f64],
    partition: &Partition,
) -> Result<Vec<f64>, SolveError> {
    check_partition(sys, partition)?;
    let r = residual(sys, x)?;
    let mut out = vec![0.0; partition.t()];
    block_norms_from_residual(&r, partition, &mut out);
    Ok(out)
}

fn block_norms_from_residual(r: &[f64], partition: &Partition, out: &mut [f64]) {
    for (o, block) in out.iter_mut().zip(partition.blocks()) {
        *o = block.iter().map(|&i| r[i] * r[i]).sum();
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn select_max_block(norms_sq: &[f64]) -> Result<usize, SolveError> {
    if norms_sq.is_empty() {
        return Err(SolveError::EmptySelection);
    }
    Ok(argmax(norms_sq))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_partition(sys: &LinearSystem, partition: &Partition) -> Result<(), SolveError> {
    partition
        .check_rows(sys.a().nrows())
        .map_err(|e| SolveError::InvalidMethod(e.to_string()))
}

/// Maximum residual block Kaczmarz: project onto the block with the largest residual.
pub fn mrbk_step(
    sys: &LinearSystem,
    x: &[f64],
    partition: &Partition,
    lsq: &LsqConfig,
) -> Result<Step, SolveError> {
    check_partition(sys, partition)?;
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let mut norms = vec![0.0; partition.t()];
    let selected = mrbk_update(sys.a(), &mut x, &r, partition, lsq, &mut norms)?;
    Ok(Step { x, selected })
}

fn mrbk_update(
    a: &SparseMatrix,
    x: &mut [f64],
    r: &[f64],
    partition: &Partition,
    lsq: &LsqConfig,
    norms: &mut [f64],
) -> Result<usize, SolveError> {
    block_norms_from_residual(r, partition, norms);
    let selected = argmax(norms);
    project_block(&partition.view(a, selected), r, x, lsq)?;
    Ok(selected)
}

/// `x += A_V^+ r_V` through CGLS.
fn project_block(
    view: &RowBlockView<'_>,
    r: &[f64],
    x: &mut [f64],
    lsq: &LsqConfig,
) -> Result<(), SolveError> {
    let r_block: Vec<f64> = view.row_indices().map(|i| r[i]).collect();
    let out = least_squares_apply(view, &r_block, lsq)?;
    if !out.converged {
        return Err(SolveError::InnerFailure {
            iterations: out.iterations,
            rel: out.rel_normal_residual,
        });
    }
    axpy(1.0, &out.solution, x);
    Ok(())
}

/// Maximum residual average block Kaczmarz: same block choice as MRBK, pseudo-inverse-free
/// update `x += alpha_k A_V^T r_V / ||A_V||_F^2` with
/// `alpha_k = omega ||r_V||^2 ||A_V||_F^2 / ||A_V^T r_V||^2`.
pub fn mrabk_step(
    sys: &LinearSystem,
    x: &[f64],
    partition: &Partition,
    omega: f64,
) -> Result<MrabkStep, SolveError> {
    check_partition(sys, partition)?;
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let mut norms = vec![0.0; partition.t()];
    let mut g = vec![0.0; sys.a().ncols()];
    let (selected, step_size) =
        mrabk_update(sys.a(), &mut x, &r, partition, omega, &mut norms, &mut g)?;
    Ok(MrabkStep {
        x,
        selected,
        step_size,
    })
}

fn mrabk_update(
    a: &SparseMatrix,
    x: &mut [f64],
    r: &[f64],
    partition: &Partition,
    omega: f64,
    norms: &mut [f64],
    g: &mut [f64],
) -> Result<(usize, f64), SolveError> {
    block_norms_from_residual(r, partition, norms);
    let selected = argmax(norms);
    let view = partition.view(a, selected);
    let r_block: Vec<f64> = view.row_indices().map(|i| r[i]).collect();
    let res_sq = norms[selected];
    if res_sq == 0.0 {
        return Ok((selected, 0.0));
    }
    view.apply_transpose_into(&r_block, g);
    let g_sq = norm_sq(g);
    if g_sq == 0.0 {
        return Err(SolveError::Inconsistent {
            block: selected,
            residual: res_sq.sqrt(),
        });
    }
    let frob = view.frobenius_norm_sq();
    let step_size = omega * res_sq * frob / g_sq;
    axpy(step_size / frob, g, x);
    Ok((selected, step_size))
}

/// `x += (b_i - A^(i) x) / ||A^(i)||^2 (A^(i))^T`
fn project_row(a: &SparseMatrix, b: &[f64], x: &mut [f64], row: usize) -> Result<(), SolveError> {
    let norm = a.row_norm_sq(row);
    if norm == 0.0 {
        return Err(SolveError::ZeroRow { row });
    }
    let coef = (b[row] - a.row_dot(row, x)) / norm;
    a.add_row_to(row, coef, x);
    Ok(())
}

/// Maximal residual Kaczmarz: project onto the row with the largest `|r_i|`.
pub fn mrk_step(sys: &LinearSystem, x: &[f64]) -> Result<Step, SolveError> {
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let selected = mrk_update(sys, &mut x, &r)?;
    Ok(Step { x, selected })
}

fn mrk_update(sys: &LinearSystem, x: &mut [f64], r: &[f64]) -> Result<usize, SolveError> {
    if r.is_empty() {
        return Err(SolveError::EmptySelection);
    }
    let mut best = 0;
    for (i, v) in r.iter().enumerate().skip(1) {
        if v.abs() > r[best].abs() {
            best = i;
        }
    }
    project_row(sys.a(), sys.b(), x, best)?;
    Ok(best)
}

/// Randomized Kaczmarz: row `i` with probability `||A^(i)||^2 / ||A||_F^2`.
pub fn rk_step(sys: &LinearSystem, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Step, SolveError> {
    check_len(sys.a().ncols(), x.len())?;
    let sampler = row_norm_sampler(sys.a())?;
    let mut x = x.to_vec();
    let selected = sampler.sample(rng);
    project_row(sys.a(), sys.b(), &mut x, selected)?;
    Ok(Step { x, selected })
}

fn row_norm_sampler(a: &SparseMatrix) -> Result<WeightedIndex<f64>, SolveError> {
    WeightedIndex::new(a.row_norms_sq().iter().copied())
        .map_err(|_| SolveError::Linalg(crate::sparsela::LinalgError::ZeroMatrix))
}

/// Rows kept by the greedy threshold shared by GRK and GBK:
/// `|r_i|^2 / ||A^(i)||^2 >= (1/2) (max_j |r_j|^2 / ||A^(j)||^2 + ||r||^2 / ||A||_F^2)`.
///
/// Rows of zero norm are skipped. Returned ascending.
pub fn greedy_row_candidates(a: &SparseMatrix, r: &[f64]) -> Vec<usize> {
    let weights: Vec<f64> = (0..a.nrows())
        .map(|i| {
            let norm = a.row_norm_sq(i);
            if norm > 0.0 {
                r[i] * r[i] / norm
            } else {
                -1.0
            }
        })
        .collect();
    let max_w = weights.iter().copied().fold(0.0, f64::max);
    if max_w == 0.0 {
        return Vec::new();
    }
    let threshold = 0.5 * (max_w + norm_sq(r) / a.frobenius_norm_sq());
    let cut = threshold * (1.0 - GREEDY_THRESHOLD_SLACK);
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= cut)
        .map(|(i, _)| i)
        .collect()
}

/// Greedy randomized Kaczmarz: sample within [`greedy_row_candidates`] with probability
/// proportional to `|r_i|^2`.
pub fn grk_step(sys: &LinearSystem, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Step, SolveError> {
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let selected = grk_update(sys, &mut x, &r, rng)?;
    Ok(Step { x, selected })
}

fn grk_update(
    sys: &LinearSystem,
    x: &mut [f64],
    r: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<usize, SolveError> {
    let candidates = greedy_row_candidates(sys.a(), r);
    let selected = sample_proportional(&candidates, |i| r[i] * r[i], rng)?;
    project_row(sys.a(), sys.b(), x, selected)?;
    Ok(selected)
}

fn sample_proportional(
    items: &[usize],
    weight: impl Fn(usize) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize, SolveError> {
    match items {
        [] => Err(SolveError::EmptySelection),
        [only] => Ok(*only),
        _ => {
            let dist = WeightedIndex::new(items.iter().map(|&i| weight(i)))
                .map_err(|_| SolveError::EmptySelection)?;
            Ok(items[dist.sample(rng)])
        }
    }
}

/// Greedy block Kaczmarz: project onto every row of [`greedy_row_candidates`] at once.
pub fn gbk_step(sys: &LinearSystem, x: &[f64], lsq: &LsqConfig) -> Result<GbkStep, SolveError> {
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let rows = greedy_row_candidates(sys.a(), &r);
    if rows.is_empty() {
        return Err(SolveError::EmptySelection);
    }
    let view = RowBlockView::new_unchecked(sys.a(), &rows);
    project_block(&view, &r, &mut x, lsq)?;
    Ok(GbkStep { x, rows })
}

/// Blocks kept by the block greedy threshold:
/// `||r_{V_i}||^2 / ||A_{V_i}||_F^2 >= (1/2) (max_j ||r_{V_j}||^2 / ||A_{V_j}||_F^2 + ||r||^2 / ||A||_F^2)`.
pub fn greedy_block_candidates(
    a: &SparseMatrix,
    partition: &Partition,
    r: &[f64],
) -> Vec<usize> {
    let mut norms = vec![0.0; partition.t()];
    block_norms_from_residual(r, partition, &mut norms);
    let frob: Vec<f64> = (0..partition.t())
        .map(|i| partition.view(a, i).frobenius_norm_sq())
        .collect();
    greedy_blocks_from(&norms, &frob, norm_sq(r), a.frobenius_norm_sq())
}

fn greedy_blocks_from(norms: &[f64], frob: &[f64], r_sq: f64, a_frob: f64) -> Vec<usize> {
    let weights: Vec<f64> = norms
        .iter()
        .zip(frob)
        .map(|(&n, &f)| if f > 0.0 { n / f } else { -1.0 })
        .collect();
    let max_w = weights.iter().copied().fold(0.0, f64::max);
    if max_w == 0.0 {
        return Vec::new();
    }
    let cut = 0.5 * (max_w + r_sq / a_frob) * (1.0 - GREEDY_THRESHOLD_SLACK);
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= cut)
        .map(|(i, _)| i)
        .collect()
}

/// Greedy randomized block Kaczmarz: sample a block among [`greedy_block_candidates`]
/// with probability proportional to `||r_{V_i}||^2`, then project exactly.
pub fn grbk_step(
    sys: &LinearSystem,
    x: &[f64],
    partition: &Partition,
    rng: &mut ChaCha8Rng,
    lsq: &LsqConfig,
) -> Result<Step, SolveError> {
    check_partition(sys, partition)?;
    let r = residual(sys, x)?;
    let mut x = x.to_vec();
    let frob = block_frobenius(sys.a(), partition);
    let mut norms = vec![0.0; partition.t()];
    let selected = grbk_update(sys.a(), &mut x, &r, partition, &frob, &mut norms, rng, lsq)?;
    Ok(Step { x, selected })
}

fn block_frobenius(a: &SparseMatrix, partition: &Partition) -> Vec<f64> {
    (0..partition.t())
        .map(|i| partition.view(a, i).frobenius_norm_sq())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn grbk_update(
    a: &SparseMatrix,
    x: &mut [f64],
    r: &[f64],
    partition: &Partition,
    frob: &[f64],
    norms: &mut [f64],
    rng: &mut ChaCha8Rng,
    lsq: &LsqConfig,
) -> Result<usize, SolveError> {
    block_norms_from_residual(r, partition, norms);
    let candidates = greedy_blocks_from(norms, frob, norm_sq(r), a.frobenius_norm_sq());
    let selected = sample_proportional(&candidates, |i| norms[i], rng)?;
    project_block(&partition.view(a, selected), r, x, lsq)?;
    Ok(selected)
}

/// Randomized block Kaczmarz: a uniformly random block, projected exactly.
pub fn rbk_step(
    sys: &LinearSystem,
    x: &[f64],
    partition: &Partition,
    rng: &mut ChaCha8Rng,
    lsq: &LsqConfig,
) -> Result<Step, SolveError> {
    check_partition(sys, partition)?;
    check_len(sys.a().ncols(), x.len())?;
    let mut x = x.to_vec();
    let selected = rbk_update(sys, &mut x, partition, rng, lsq)?;
    Ok(Step { x, selected })
}

fn rbk_update(
    sys: &LinearSystem,
    x: &mut [f64],
    partition: &Partition,
    rng: &mut ChaCha8Rng,
    lsq: &LsqConfig,
) -> Result<usize, SolveError> {
    let selected = if partition.t() == 1 {
        0
    } else {
        rng.random_range(0..partition.t())
    };
    let view = partition.view(sys.a(), selected);
    let mut r = vec![0.0; sys.a().nrows()];
    for i in view.row_indices() {
        r[i] = sys.b()[i] - sys.a().row_dot(i, x);
    }
    project_block(&view, &r, x, lsq)?;
    Ok(selected)
}

/// Cyclic Kaczmarz: iteration `k` (0-based) projects onto row `k mod m`.
pub fn classic_kaczmarz_step(
    sys: &LinearSystem,
    x: &[f64],
    k: usize,
) -> Result<Vec<f64>, SolveError> {
    check_len(sys.a().ncols(), x.len())?;
    let mut x = x.to_vec();
    project_row(sys.a(), sys.b(), &mut x, k % sys.a().nrows())?;
    Ok(x)
}

/// In-place stepping state for the driver.
pub(crate) struct Stepper<'a> {
    sys: &'a LinearSystem,
    method: &'a Method,
    rng: ChaCha8Rng,
    row_sampler: Option<WeightedIndex<f64>>,
    block_frob: Vec<f64>,
    norms: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(
        sys: &'a LinearSystem,
        method: &'a Method,
        rng: ChaCha8Rng,
    ) -> Result<Self, SolveError> {
        let a = sys.a();
        let row_sampler = match method.kind {
            MethodKind::Rk => Some(row_norm_sampler(a)?),
            _ => None,
        };
        let t = method.partition.as_ref().map_or(0, |p| p.t());
        let block_frob = match (&method.partition, method.kind) {
            (Some(p), MethodKind::Grbk) => block_frobenius(a, p),
            _ => Vec::new(),
        };
        Ok(Self {
            sys,
            method,
            rng,
            row_sampler,
            block_frob,
            norms: vec![0.0; t],
            g: vec![0.0; a.ncols()],
        })
    }

    /// Advances `x` by one iteration. `r` must hold `b - A x` for methods that read the
    /// full residual.
    pub(crate) fn step(&mut self, x: &mut [f64], r: &[f64], k: usize) -> Result<usize, SolveError> {
        let sys = self.sys;
        let a = sys.a();
        let lsq = &self.method.lsq;
        let partition = self.method.partition.as_deref();
        match self.method.kind {
            MethodKind::Kaczmarz => {
                let row = k % a.nrows();
                project_row(a, sys.b(), x, row)?;
                Ok(row)
            }
            MethodKind::Rk => {
                let row = self
                    .row_sampler
                    .as_ref()
                    .expect("sampler built for RK")
                    .sample(&mut self.rng);
                project_row(a, sys.b(), x, row)?;
                Ok(row)
            }
            MethodKind::Mrk => mrk_update(sys, x, r),
            MethodKind::Grk => grk_update(sys, x, r, &mut self.rng),
            MethodKind::Gbk => {
                let rows = greedy_row_candidates(a, r);
                if rows.is_empty() {
                    return Err(SolveError::EmptySelection);
                }
                let lead = rows
                    .iter()
                    .copied()
                    .max_by(|&i, &j| {
                        let wi = r[i] * r[i] / a.row_norm_sq(i);
                        let wj = r[j] * r[j] / a.row_norm_sq(j);
                        wi.total_cmp(&wj).then(j.cmp(&i))
                    })
                    .expect("nonempty");
                project_block(&RowBlockView::new_unchecked(a, &rows), r, x, lsq)?;
                Ok(lead)
            }
            MethodKind::Rbk => rbk_update(sys, x, partition.expect("validated"), &mut self.rng, lsq),
            MethodKind::Grbk => grbk_update(
                a,
                x,
                r,
                partition.expect("validated"),
                &self.block_frob,
                &mut self.norms,
                &mut self.rng,
                lsq,
            ),
            MethodKind::Mrbk => {
                mrbk_update(a, x, r, partition.expect("validated"), lsq, &mut self.norms)
            }
            MethodKind::Mrabk => mrabk_update(
                a,
                x,
                r,
                partition.expect("validated"),
                self.method.omega_value(),
                &mut self.norms,
                &mut self.g,
            )
            .map(|(sel, _)| sel),
        }
    }
}
