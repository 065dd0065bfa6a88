//! Row-paving bounds of a random partition and the contraction factors they imply.
//!
//! Also writes the partition in its text form and reads it back.
//!
//! ```text
//! cargo run --release --example paving_bounds -- [m] [n] [density] [t]
//! ```

use klab::harness::{generate_sparse_gaussian, normalize_rows};
use klab::partition::{convergence_factors, default_block_count, paving_bounds};
use klab::{DenseCap, Partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let m: usize = arg(0, "600").parse()?;
    let n: usize = arg(1, "100").parse()?;
    let density: f64 = arg(2, "0.05").parse()?;

    let a = normalize_rows(&generate_sparse_gaussian(m, n, density, 0)?)?.matrix;
    let t = match args.get(3) {
        Some(t) => t.parse()?,
        None => default_block_count(&a)?,
    };
    let partition = Partition::randomized(a.nrows(), t, 0)?;
    let bounds = paving_bounds(&a, &partition, DenseCap::DEFAULT)?;

    println!("{} x {}, t = {t}", a.nrows(), a.ncols());
    println!("alpha = {:.6}  beta = {:.6}", bounds.alpha, bounds.beta);
    println!("sigma_min(A)^2 = {:.6e}  zeta = {:.4}", bounds.sigma_min_sq, bounds.zeta);
    println!("\n{:>5} {:>6} {:>12} {:>12} {:>10}", "block", "rows", "sigma_min^2", "sigma_max^2", "||A_V||_F^2");
    for (i, b) in bounds.blocks.iter().enumerate() {
        println!(
            "{:>5} {:>6} {:>12.6} {:>12.6} {:>10.3}",
            i + 1,
            partition.block(i).len(),
            b.sigma_min_sq,
            b.sigma_max_sq,
            b.frobenius_sq
        );
    }

    let f = convergence_factors(&bounds, &partition, 0.8);
    println!("\nper-step contraction factors");
    println!("  MRBK          {:.8}", f.rho_mrbk);
    println!("  MRABK (w=0.8) {:.8}", f.rho_mrabk);
    println!("  RBK           {:.8}", f.rho_rbk);
    println!("  GRBK          {:.8}", f.rho_grbk);

    let path = std::env::temp_dir().join("klab-partition.txt");
    partition.write(&path)?;
    assert_eq!(Partition::read(&path)?, partition);
    println!("\npartition written to {}", path.display());
    Ok(())
}
