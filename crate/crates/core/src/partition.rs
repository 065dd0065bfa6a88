//! Randomized row partitions, row-paving bounds and the convergence factors built on them.
//!
//! A partition of `[m]` into `t` blocks is defined by a permutation `pi`: block `i`
//! (0-based) holds `pi[k]` for `floor(i*m/t) <= k < floor((i+1)*m/t)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rng::{stream, Stream};
use crate::sparsela::{
    singular_values, spectral_norm_sq, DenseCap, LinalgError, RowBlockView, SparseMatrix,
    POWER_MAX_ITER, POWER_TOL, SINGULAR_VALUE_RTOL,
};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("block count t = {t} must satisfy 1 <= t <= m = {m}")]
    InvalidBlockCount { t: usize, m: usize },
    #[error("not a permutation of 0..{m}: {reason}")]
    InvalidPermutation { m: usize, reason: String },
    #[error("partition covers {partition} rows but the matrix has {matrix}")]
    RowCountMismatch { partition: usize, matrix: usize },
    #[error("partition file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered list of `t` disjoint row-index sets covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    m: usize,
    seed: u64,
    permutation: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Shuffles `0..m` with Fisher-Yates on the seeded permutation stream, then cuts it
    /// into `t` contiguous runs.
    pub fn randomized(m: usize, t: usize, seed: u64) -> Result<Self, PartitionError> {
        check_block_count(m, t)?;
        let mut rng = stream(seed, Stream::Permutation);
        let mut permutation: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            permutation.swap(i, j);
        }
        Self::from_permutation(permutation, t, seed)
    }

    /// Builds the partition for an explicit permutation; `seed` is only recorded.
    pub fn from_permutation(
        permutation: Vec<usize>,
        t: usize,
        seed: u64,
    ) -> Result<Self, PartitionError> {
        let m = permutation.len();
        check_block_count(m, t)?;
        let mut seen = vec![false; m];
        for &p in &permutation {
            if p >= m || std::mem::replace(&mut seen[p], true) {
                return Err(PartitionError::InvalidPermutation {
                    m,
                    reason: format!("entry {p} out of range or repeated"),
                });
            }
        }
        let blocks = (0..t)
            .map(|i| permutation[i * m / t..(i + 1) * m / t].to_vec())
            .collect();
        Ok(Self {
            m,
            seed,
            permutation,
            blocks,
        })
    }

    /// Identity permutation with `t` blocks.
    pub fn contiguous(m: usize, t: usize) -> Result<Self, PartitionError> {
        Self::from_permutation((0..m).collect(), t, 0)
    }

    /// One block per row, in row order.
    pub fn singletons(m: usize) -> Result<Self, PartitionError> {
        Self::contiguous(m, m)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.blocks.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// `A_{V_i}` as a view into `a`.
    pub fn view<'a>(&'a self, a: &'a SparseMatrix, i: usize) -> RowBlockView<'a> {
        debug_assert_eq!(a.nrows(), self.m);
        RowBlockView::new_unchecked(a, &self.blocks[i])
    }

    pub fn check_rows(&self, nrows: usize) -> Result<(), PartitionError> {
        if nrows == self.m {
            Ok(())
        } else {
            Err(PartitionError::RowCountMismatch {
                partition: self.m,
                matrix: nrows,
            })
        }
    }

    /// Text form: a header `m t seed`, then one line per block with its 1-based rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.m, self.t(), self.seed);
        for block in &self.blocks {
            let line: Vec<String> = block.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, PartitionError> {
        let perr = |line: usize, message: &str| PartitionError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(perr(1, "header must be `m t seed`"));
        }
        let parse_u = |s: &str| s.parse::<u64>().map_err(|_| perr(1, "bad integer in header"));
        let m = parse_u(fields[0])? as usize;
        let t = parse_u(fields[1])? as usize;
        let seed = parse_u(fields[2])?;
        let mut permutation = Vec::with_capacity(m);
        let mut sizes = Vec::with_capacity(t);
        for (lineno, line) in lines {
            if sizes.len() == t && line.trim().is_empty() {
                continue;
            }
            let before = permutation.len();
            for tok in line.split_whitespace() {
                let idx: usize = tok
                    .parse()
                    .map_err(|_| perr(lineno + 1, "bad row index"))?;
                if idx == 0 {
                    return Err(perr(lineno + 1, "row indices are 1-based"));
                }
                permutation.push(idx - 1);
            }
            sizes.push(permutation.len() - before);
        }
        if sizes.len() != t {
            return Err(perr(text.lines().count(), "block count differs from header"));
        }
        if permutation.len() != m {
            return Err(perr(1, "blocks do not cover m rows"));
        }
        let parsed = Self::from_permutation(permutation, t, seed)?;
        let expected: Vec<usize> = parsed.blocks.iter().map(Vec::len).collect();
        if expected != sizes {
            return Err(perr(2, "block sizes do not follow the floor(i*m/t) boundaries"));
        }
        Ok(parsed)
    }

    pub fn write(&self, path: &Path) -> Result<(), PartitionError> {
        std::fs::write(path, self.to_text()).map_err(|source| PartitionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, PartitionError> {
        let text = std::fs::read_to_string(path).map_err(|source| PartitionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_text(&text)
    }
}

fn check_block_count(m: usize, t: usize) -> Result<(), PartitionError> {
    if t == 0 || t > m {
        Err(PartitionError::InvalidBlockCount { t, m })
    } else {
        Ok(())
    }
}

/// `ceil(||A||_2^2)`, clamped to `[1, m]`.
///
/// Estimates within `1e-9` (relative) of an integer snap to it, so an exact `||A||_2^2 = 9`
/// yields 9 even when the power iteration lands one ulp above.
pub fn default_block_count(a: &SparseMatrix) -> Result<usize, PartitionError> {
    let est = spectral_norm_sq(a, POWER_TOL, POWER_MAX_ITER)?;
    if !est.converged {
        log::warn!(
            "power iteration did not converge after {} steps; using {}",
            est.iterations,
            est.value
        );
    }
    Ok(block_count_for(est.value, a.nrows()))
}

pub(crate) fn block_count_for(norm_sq: f64, m: usize) -> usize {
    let nearest = norm_sq.round();
    let t = if (norm_sq - nearest).abs() <= 1e-9 * norm_sq.max(1.0) {
        nearest
    } else {
        norm_sq.ceil()
    };
    let t = (t.max(1.0) as usize).max(1);
    if t > m {
        log::warn!("block count {t} exceeds the row count {m}; clamping");
        m
    } else {
        t
    }
}

/// Extreme squared singular values of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpectrum {
    /// Smallest of the `min(|V|, n)` squared singular values; 0 when rank-deficient.
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    pub frobenius_sq: f64,
}

/// Row-paving bounds `(alpha, beta)` of a partition, plus `sigma_min(A)^2` and the smallest
/// block Frobenius norm `zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PavingBounds {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_min_sq: f64,
    pub zeta: f64,
    pub blocks: Vec<BlockSpectrum>,
}

/// Dense per-block SVDs; `sigma_min(A)^2` from a dense SVD of the whole matrix.
pub fn paving_bounds(
    a: &SparseMatrix,
    partition: &Partition,
    cap: DenseCap,
) -> Result<PavingBounds, PartitionError> {
    partition.check_rows(a.nrows())?;
    cap.check(a.nrows(), a.ncols())?;
    let sigma_min_sq = crate::sparsela::smallest_nonzero_singular_value_sq(a, cap)?;
    let blocks: Vec<BlockSpectrum> = (0..partition.t())
        .map(|i| block_spectrum(&partition.view(a, i)))
        .collect();
    let alpha = blocks
        .iter()
        .map(|b| b.sigma_min_sq)
        .fold(f64::INFINITY, f64::min);
    let beta = blocks.iter().map(|b| b.sigma_max_sq).fold(0.0, f64::max);
    let zeta = blocks
        .iter()
        .map(|b| b.frobenius_sq)
        .fold(f64::INFINITY, f64::min);
    for b in &blocks {
        assert!(alpha <= b.sigma_min_sq && b.sigma_max_sq <= beta);
    }
    Ok(PavingBounds {
        alpha,
        beta,
        sigma_min_sq,
        zeta,
        blocks,
    })
}

fn block_spectrum(view: &RowBlockView<'_>) -> BlockSpectrum {
    let s = singular_values(view.to_dense());
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    let min = if min > SINGULAR_VALUE_RTOL * max { min } else { 0.0 };
    BlockSpectrum {
        sigma_min_sq: min * min,
        sigma_max_sq: max * max,
        frobenius_sq: view.frobenius_norm_sq(),
    }
}

/// Upper bounds on the per-step squared-error contraction of the block methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFactors {
    pub sigma_min_sq: f64,
    pub beta: f64,
    pub t: usize,
    pub m: usize,
    pub frobenius_sq: f64,
    pub zeta: f64,
    /// `1 - sigma_min^2 / (beta (t-1))`
    pub rho_mrbk: f64,
    /// `1 - sigma_min^2 / (beta m)`
    pub rho_rbk: f64,
    /// `1 - (zeta/2) (F/(F+zeta) + 1) sigma_min^2 / (beta F)` with `F = ||A||_F^2`
    pub rho_grbk: f64,
    pub omega: f64,
    /// `1 - (2w - w^2) sigma_min^2 / (beta (t-1))`
    pub rho_mrabk: f64,
}

impl ConvergenceFactors {
    /// Denominator of the steady-state factor: `t - 1`, or `t` when `t = 1`.
    fn steady_blocks(&self) -> f64 {
        if self.t > 1 {
            (self.t - 1) as f64
        } else {
            1.0
        }
    }

    /// MRABK factor for relaxation `omega` (steps `k >= 1`).
    pub fn mrabk(&self, omega: f64) -> f64 {
        1.0 - (2.0 * omega - omega * omega) * self.sigma_min_sq / (self.beta * self.steady_blocks())
    }

    /// Factor for the first step (`k = 0`), where every block may carry residual.
    /// `weight` is 1 for MRBK and `2w - w^2` for MRABK.
    pub fn first_step(&self, weight: f64) -> f64 {
        1.0 - weight * self.sigma_min_sq / (self.beta * self.t as f64)
    }

    /// Factor for steps `k >= 1`.
    pub fn steady_step(&self, weight: f64) -> f64 {
        1.0 - weight * self.sigma_min_sq / (self.beta * self.steady_blocks())
    }
}

/// Factors for `partition`; `||A||_F^2` is summed from the per-block spectra in `bounds`.
pub fn convergence_factors(
    bounds: &PavingBounds,
    partition: &Partition,
    omega: f64,
) -> ConvergenceFactors {
    let frobenius_sq: f64 = bounds.blocks.iter().map(|b| b.frobenius_sq).sum();
    let mut f = ConvergenceFactors {
        sigma_min_sq: bounds.sigma_min_sq,
        beta: bounds.beta,
        t: partition.t(),
        m: partition.m(),
        frobenius_sq,
        zeta: bounds.zeta,
        rho_mrbk: 0.0,
        rho_rbk: 0.0,
        rho_grbk: 0.0,
        omega,
        rho_mrabk: 0.0,
    };
    let ratio = bounds.sigma_min_sq / bounds.beta;
    f.rho_mrbk = f.steady_step(1.0);
    f.rho_rbk = 1.0 - ratio / f.m as f64;
    f.rho_grbk = 1.0
        - 0.5 * bounds.zeta * (frobenius_sq / (frobenius_sq + bounds.zeta) + 1.0) * ratio
            / frobenius_sq;
    f.rho_mrabk = f.mrabk(omega);
    f
}
