//! Experiment reproduction: test matrices, consistent systems, repeated benchmarks,
//! contraction-bound checks and report output.

mod experiment;
mod generate;
mod mm;
mod report;
mod system;
mod verify;

use std::path::Path;

use thiserror::Error;

pub use experiment::{
    prepare_experiment, run_experiment, BlockCount, ExperimentResult, ExperimentSpec,
    MatrixInfo, MatrixSource, MethodResult, MethodSpec, PreparedExperiment, SpeedUps,
};
pub use generate::{generate_sparse_gaussian, normalize_rows, trefethen, NormalizedMatrix};
pub use mm::{parse_matrix_market, read_matrix_market, write_matrix_market};
pub use report::{csv_twin, read_trace_csv, render_report, write_report, write_trace_csv};
pub use system::{make_consistent_system, SystemFactory};
pub use verify::{verify_theorem_bounds, BoundCheck, BoundViolation, BOUND_SLACK};

use crate::partition::PartitionError;
use crate::solvers::SolveError;
use crate::sparsela::LinalgError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("matrix has no nonzero rows")]
    EmptyMatrix,
    #[error("report has no reference solution to measure errors against")]
    MissingSolution,
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
