//! Solve one sparse Gaussian system with every method in the crate.
//!
//! ```text
//! cargo run --release --example solve_methods -- [m] [n] [density] [seed]
//! ```

use std::sync::Arc;

use klab::harness::{generate_sparse_gaussian, make_consistent_system, normalize_rows};
use klab::partition::default_block_count;
use klab::solvers::solve;
use klab::{DenseCap, Method, MethodKind, Partition, StopRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let m: usize = arg(0, "2000").parse()?;
    let n: usize = arg(1, "400").parse()?;
    let density: f64 = arg(2, "0.02").parse()?;
    let seed: u64 = arg(3, "1").parse()?;

    let a = normalize_rows(&generate_sparse_gaussian(m, n, density, seed)?)?.matrix;
    let a = Arc::new(a);
    let sys = make_consistent_system(a.clone(), seed, DenseCap::DEFAULT, true)?;
    let t = default_block_count(&a)?;
    let partition = Arc::new(Partition::randomized(a.nrows(), t, seed)?);
    println!("{} x {} with {} nonzeros, t = {t}\n", a.nrows(), a.ncols(), a.nnz());
    println!("{:<9} {:>8} {:>10} {:>12}", "method", "IT", "CPU (s)", "final RSE");

    let stop = StopRule::default();
    for kind in MethodKind::ALL {
        let method = match kind {
            MethodKind::Mrabk => Method::mrabk(partition.clone(), 1.0),
            k if k.needs_partition() => Method::with_partition(k, partition.clone()),
            k => Method::new(k),
        };
        let report = solve(&sys, &method, &stop, seed)?;
        println!(
            "{:<9} {:>8} {:>10.4} {:>12.3e}  {}",
            kind.label(),
            report.iterations,
            report.wall_seconds,
            report.final_rse,
            report.termination
        );
    }
    Ok(())
}
