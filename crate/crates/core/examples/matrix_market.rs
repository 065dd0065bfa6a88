//! Benchmark the block methods on a matrix read from a Matrix Market file.
//!
//! Without an argument the 700 x 700 Trefethen matrix is generated, written to a
//! temporary `.mtx` file and read back, which exercises the same path as a downloaded
//! SuiteSparse matrix.
//!
//! ```text
//! cargo run --release --example matrix_market -- [path/to/matrix.mtx] [repetitions]
//! ```

use std::path::PathBuf;

use klab::harness::{
    read_matrix_market, render_report, run_experiment, trefethen, write_matrix_market,
    ExperimentSpec, MatrixSource, MethodSpec,
};
use klab::MethodKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from);
    let repetitions: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);

    let dir = std::env::temp_dir().join("klab-example");
    let path = match path {
        Some(p) => p,
        None => {
            std::fs::create_dir_all(&dir)?;
            let p = dir.join("Trefethen_700.mtx");
            write_matrix_market(&trefethen(700), &p)?;
            p
        }
    };
    let a = read_matrix_market(&path)?;
    println!(
        "{}: {} x {}, {} nonzeros ({:.2}%)",
        path.display(),
        a.nrows(),
        a.ncols(),
        a.nnz(),
        100.0 * a.density()
    );

    let methods = [
        MethodKind::Mrk,
        MethodKind::Rbk,
        MethodKind::Gbk,
        MethodKind::Grbk,
        MethodKind::Mrbk,
        MethodKind::Mrabk,
    ]
    .map(MethodSpec::new)
    .to_vec();
    let mut spec = ExperimentSpec::new(MatrixSource::MatrixMarket(path), methods);
    spec.repetitions = repetitions;
    print!("{}", render_report(&[run_experiment(&spec)?]));
    Ok(())
}
