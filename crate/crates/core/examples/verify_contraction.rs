//! Check every step of MRBK and MRABK against its contraction bound and save the traces.
//!
//! ```text
//! cargo run --release --example verify_contraction -- [m] [n] [omega]
//! ```

use std::sync::Arc;

use klab::harness::{
    generate_sparse_gaussian, make_consistent_system, normalize_rows, verify_theorem_bounds,
    write_trace_csv,
};
use klab::partition::{default_block_count, paving_bounds};
use klab::solvers::solve;
use klab::{DenseCap, Method, Partition, StopRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let m: usize = arg(0, "400").parse()?;
    let n: usize = arg(1, "80").parse()?;
    let omega: f64 = arg(2, "0.8").parse()?;

    let a = Arc::new(normalize_rows(&generate_sparse_gaussian(m, n, 0.05, 3)?)?.matrix);
    let sys = make_consistent_system(a.clone(), 3, DenseCap::DEFAULT, false)?;
    let t = default_block_count(&a)?;
    let partition = Arc::new(Partition::randomized(a.nrows(), t, 3)?);
    let bounds = paving_bounds(&a, &partition, DenseCap::DEFAULT)?;
    let stop = StopRule {
        rse_tol: 1e-12,
        ..StopRule::default()
    };

    let out = std::env::temp_dir();
    for (name, method) in [
        ("mrbk", Method::mrbk(partition.clone())),
        ("mrabk", Method::mrabk(partition.clone(), omega)),
    ] {
        let report = solve(&sys, &method, &stop, 0)?;
        let check = verify_theorem_bounds(&report, &bounds, &method)?;
        println!(
            "{name}: {} steps, worst ratio {:.6} vs factors {:.6} (first) / {:.6} (later), {}",
            check.steps_checked,
            check.max_ratio,
            check.first_factor,
            check.steady_factor,
            if check.passed() { "bound holds" } else { "VIOLATED" }
        );
        let path = out.join(format!("klab-trace-{name}.csv"));
        write_trace_csv(&report, &path)?;
        println!("  trace: {}", path.display());
    }
    Ok(())
}
