use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::HarnessError;
use crate::rng::{stream, Stream};
use crate::sparsela::SparseMatrix;

/// Rows whose squared norm is within this of 1 count as normalized and are left untouched.
const UNIT_ROW_TOL: f64 = 1e-14;

/// Random sparse matrix with `round(density * m * n)` standard normal entries at distinct
/// positions drawn uniformly without replacement.
pub fn generate_sparse_gaussian(
    m: usize,
    n: usize,
    density: f64,
    seed: u64,
) -> Result<SparseMatrix, HarnessError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(HarnessError::InvalidSpec(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if m == 0 || n == 0 {
        return Err(HarnessError::InvalidSpec("matrix dimensions must be positive".into()));
    }
    let total = m
        .checked_mul(n)
        .ok_or_else(|| HarnessError::InvalidSpec(format!("{m}x{n} overflows")))?;
    let count = ((density * total as f64).round() as usize).clamp(1, total);
    let mut rng = stream(seed, Stream::Matrix);
    let mut positions = index::sample(&mut rng, total, count).into_vec();
    positions.sort_unstable();

    let mut row_offsets = vec![0usize; m + 1];
    let mut col_indices = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for p in positions {
        row_offsets[p / n + 1] += 1;
        col_indices.push(p % n);
        values.push(StandardNormal.sample(&mut rng));
    }
    for i in 0..m {
        row_offsets[i + 1] += row_offsets[i];
    }
    Ok(SparseMatrix::from_parts(
        m,
        n,
        row_offsets,
        col_indices,
        values,
    ))
}

/// A row-normalized matrix together with the original indices of its rows.
#[derive(Debug, Clone)]
pub struct NormalizedMatrix {
    pub matrix: SparseMatrix,
    /// `kept_rows[i]` is the row of the input that became row `i`.
    pub kept_rows: Vec<usize>,
}

impl NormalizedMatrix {
    pub fn removed_rows(&self, original_rows: usize) -> usize {
        original_rows - self.kept_rows.len()
    }
}

/// Drops zero rows and scales the rest to unit Euclidean norm.
///
/// Rows already within `1e-14` of unit squared norm are not rescaled, which makes the
/// operation idempotent bit for bit.
pub fn normalize_rows(a: &SparseMatrix) -> Result<NormalizedMatrix, HarnessError> {
    let kept_rows: Vec<usize> = (0..a.nrows()).filter(|&i| a.row_norm_sq(i) > 0.0).collect();
    if kept_rows.is_empty() {
        return Err(HarnessError::EmptyMatrix);
    }
    let mut out = a.select_rows(&kept_rows)?;
    // A second pass only triggers for long rows whose first rescale rounded badly.
    for _ in 0..3 {
        let scales: Vec<f64> = out
            .row_norms_sq()
            .iter()
            .map(|&s| {
                if (s - 1.0).abs() <= UNIT_ROW_TOL {
                    1.0
                } else {
                    1.0 / s.sqrt()
                }
            })
            .collect();
        if scales.iter().all(|&s| s == 1.0) {
            break;
        }
        out = out.scale_rows(&scales);
    }
    Ok(NormalizedMatrix {
        matrix: out,
        kept_rows,
    })
}

/// The `n x n` Trefethen matrix: the first `n` primes on the diagonal and ones wherever
/// `|i - j|` is a power of two.
pub fn trefethen(n: usize) -> SparseMatrix {
    let primes = first_primes(n);
    let mut triplets = Vec::new();
    for (i, &p) in primes.iter().enumerate() {
        triplets.push((i, i, p as f64));
        let mut d = 1;
        while d < n {
            if i + d < n {
                triplets.push((i, i + d, 1.0));
                triplets.push((i + d, i, 1.0));
            }
            d *= 2;
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("valid by construction")
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
