//! Benchmark the Kaczmarz family on a normalized sparse Gaussian matrix and print a
//! table of averaged iteration counts, times and speed-ups.
//!
//! ```text
//! cargo run --release --example gaussian_bench -- [m] [n] [density] [repetitions]
//! ```

use klab::harness::{run_experiment, render_report, ExperimentSpec, MatrixSource, MethodSpec};
use klab::MethodKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let m: usize = arg(0, "6000").parse()?;
    let n: usize = arg(1, "1000").parse()?;
    let density: f64 = arg(2, "0.01").parse()?;
    let repetitions: usize = arg(3, "20").parse()?;

    let methods = [
        MethodKind::Mrk,
        MethodKind::Grk,
        MethodKind::Rbk,
        MethodKind::Gbk,
        MethodKind::Grbk,
        MethodKind::Mrbk,
        MethodKind::Mrabk,
    ]
    .map(MethodSpec::new)
    .to_vec();
    let mut spec = ExperimentSpec::new(
        MatrixSource::Gaussian {
            m,
            n,
            density,
            seed: 0,
        },
        methods,
    );
    spec.repetitions = repetitions;

    let result = run_experiment(&spec)?;
    print!("{}", render_report(&[result]));
    Ok(())
}
