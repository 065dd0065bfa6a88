//! A hand-built system solved by MRABK over a range of relaxation parameters.
//!
//! The matrix is a 2D Laplacian stencil stacked on the identity, assembled from triplets.
//!
//! ```text
//! cargo run --release --example relaxation_sweep -- [grid size]
//! ```

use std::sync::Arc;

use klab::partition::default_block_count;
use klab::solvers::solve;
use klab::{LinearSystem, Method, Partition, SparseMatrix, StopRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let n = k * k;
    let mut triplets = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let row = i * k + j;
            triplets.push((row, row, 4.0));
            if i > 0 {
                triplets.push((row, row - k, -1.0));
            }
            if i + 1 < k {
                triplets.push((row, row + k, -1.0));
            }
            if j > 0 {
                triplets.push((row, row - 1, -1.0));
            }
            if j + 1 < k {
                triplets.push((row, row + 1, -1.0));
            }
            triplets.push((n + row, row, 1.0));
        }
    }
    let a = Arc::new(SparseMatrix::from_triplets(2 * n, n, &triplets)?);
    let x_star: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let b = a.spmv(&x_star)?;
    let sys = LinearSystem::new(a.clone(), b, Some(x_star), true)?;

    let t = default_block_count(&a)?;
    let partition = Arc::new(Partition::randomized(a.nrows(), t, 0)?);
    println!("{} x {}, t = {t}", a.nrows(), a.ncols());
    println!("{:>6} {:>8} {:>10}", "omega", "IT", "CPU (s)");
    for omega in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75] {
        let report = solve(&sys, &Method::mrabk(partition.clone(), omega), &StopRule::default(), 0)?;
        println!("{omega:>6.2} {:>8} {:>10.4}", report.iterations, report.wall_seconds);
    }
    let report = solve(&sys, &Method::mrbk(partition), &StopRule::default(), 0)?;
    println!("MRBK   {:>8} {:>10.4}", report.iterations, report.wall_seconds);
    Ok(())
}
