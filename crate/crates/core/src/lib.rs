//! Maximum residual block Kaczmarz solvers for sparse consistent linear systems.
//!
//! The crate is split along the lines of a typical experiment:
//!
//! * [`sparsela`] holds the CSR matrix, row-block views, the CGLS inner solve that stands
//!   in for applying a block pseudo-inverse, and spectral / dense diagnostics.
//! * [`partition`] builds the randomized row partition, computes row-paving bounds and the
//!   convergence factors that go with them.
//! * [`solvers`] contains the Kaczmarz family (classic, RK, MRK, GRK, RBK, GBK, GRBK, MRBK,
//!   MRABK) and the driver loop with RSE-based stopping and trace capture.
//! * [`harness`] generates and ingests matrices, builds consistent systems, runs repeated
//!   benchmarks, checks per-step contraction bounds and writes reports.
//! * [`cli`] maps command-line flags onto harness runs; the `klab` binary is a thin shell
//!   around it.
//!
//! All row and block indices are 0-based in the API. Text formats (Matrix Market, partition
//! files, traces) use 1-based indices.

pub mod cli;
pub mod harness;
pub mod partition;
pub mod rng;
pub mod solvers;
pub mod sparsela;

pub use partition::{ConvergenceFactors, Partition, PavingBounds};
pub use solvers::{LinearSystem, Method, MethodKind, SolveReport, StopRule, Termination};
pub use sparsela::{DenseCap, LsqConfig, RowBlockView, SparseMatrix};
