//! Dense oracles shared by the integration tests. They only use nalgebra on densified
//! matrices, never the crate's own solvers.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use klab::harness::{generate_sparse_gaussian, normalize_rows};
use klab::{LinearSystem, SparseMatrix};

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v;
    }
    d
}

pub fn rows_of(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |r, c| a[(rows[r], c)])
}

pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(1e-12 * smax.max(f64::MIN_POSITIVE)).unwrap()
}

pub fn vec_of(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `x + A_V^+ (b_V - A_V x)` computed densely.
pub fn projection_step(a: &SparseMatrix, b: &[f64], x: &[f64], rows: &[usize]) -> Vec<f64> {
    let av = rows_of(&dense(a), rows);
    let bv = DVector::from_iterator(rows.len(), rows.iter().map(|&i| b[i]));
    let r = bv - &av * vec_of(x);
    let d = pinv(&av) * r;
    x.iter().zip(d.iter()).map(|(p, q)| p + q).collect()
}

pub fn dense_residual(a: &SparseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = dense(a) * vec_of(x);
    b.iter().zip(ax.iter()).map(|(p, q)| p - q).collect()
}

pub fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Consistent system with `x*` from the dense pseudo-inverse.
pub fn consistent_system(a: SparseMatrix, seed: u64) -> LinearSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_vec(a.ncols(), &mut rng);
    let b = a.spmv(&x).unwrap();
    let x_star: Vec<f64> = (pinv(&dense(&a)) * vec_of(&b)).iter().copied().collect();
    LinearSystem::new(Arc::new(a), b, Some(x_star), true).unwrap()
}

pub fn random_system(m: usize, n: usize, density: f64, seed: u64, normalize: bool) -> LinearSystem {
    let mut a = generate_sparse_gaussian(m, n, density, seed).unwrap();
    if normalize {
        a = normalize_rows(&a).unwrap().matrix;
    }
    consistent_system(a, seed ^ 0x5eed)
}
