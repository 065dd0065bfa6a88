//! Repetition-averaged benchmarks over one matrix.

use std::path::PathBuf;
use std::sync::Arc;

use super::{generate_sparse_gaussian, normalize_rows, read_matrix_market, HarnessError, SystemFactory};
use crate::partition::{block_count_for, Partition};
use crate::solvers::{solve, Method, MethodKind, SolveReport, StopRule, Termination};
use crate::sparsela::{spectral_norm_sq, DenseCap, LsqConfig, SparseMatrix, POWER_MAX_ITER, POWER_TOL};

#[derive(Debug, Clone)]
pub enum MatrixSource {
    Gaussian {
        m: usize,
        n: usize,
        density: f64,
        seed: u64,
    },
    MatrixMarket(PathBuf),
    Matrix {
        name: String,
        matrix: Arc<SparseMatrix>,
    },
}

impl MatrixSource {
    pub fn name(&self) -> String {
        match self {
            MatrixSource::Gaussian { m, n, density, .. } => format!("gaussian_{m}x{n}_d{density}"),
            MatrixSource::MatrixMarket(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            MatrixSource::Matrix { name, .. } => name.clone(),
        }
    }

    fn load(&self) -> Result<SparseMatrix, HarnessError> {
        match self {
            MatrixSource::Gaussian { m, n, density, seed } => {
                generate_sparse_gaussian(*m, *n, *density, *seed)
            }
            MatrixSource::MatrixMarket(p) => read_matrix_market(p),
            MatrixSource::Matrix { matrix, .. } => Ok((**matrix).clone()),
        }
    }
}

/// A method to benchmark; `omega` only matters for MRABK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub omega: Option<f64>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self { kind, omega: None }
    }

    pub fn with_omega(kind: MethodKind, omega: f64) -> Self {
        Self {
            kind,
            omega: Some(omega),
        }
    }

    /// Upper-case acronym, with the relaxation appended when it differs from 1.
    pub fn label(&self) -> String {
        match self.omega {
            Some(w) if self.kind == MethodKind::Mrabk && w != 1.0 => {
                format!("{}(w={w})", self.kind.label())
            }
            _ => self.kind.label().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockCount {
    /// `ceil(||A||_2^2)` of the normalized matrix.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: MatrixSource,
    pub methods: Vec<MethodSpec>,
    pub repetitions: usize,
    pub stop: StopRule,
    pub partition_seed: u64,
    /// Base seed; repetition `r` draws `x*` and sampling streams from `seed ^ r`.
    pub seed: u64,
    pub blocks: BlockCount,
    pub lsq: LsqConfig,
    pub dense_cap: DenseCap,
    /// Compute `x*` iteratively when the matrix exceeds `dense_cap`.
    pub iterative_fallback: bool,
    /// Drop zero rows and scale rows to unit norm before anything else.
    pub normalize: bool,
}

impl ExperimentSpec {
    /// Twenty repetitions, default stopping rule, automatic block count, seeds 0.
    pub fn new(source: MatrixSource, methods: Vec<MethodSpec>) -> Self {
        Self {
            source,
            methods,
            repetitions: 20,
            stop: StopRule::default(),
            partition_seed: 0,
            seed: 0,
            blocks: BlockCount::Auto,
            lsq: LsqConfig::default(),
            dense_cap: DenseCap::from_env(),
            iterative_fallback: true,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: &str| Err(HarnessError::InvalidSpec(s.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("no methods given");
        }
        if let MatrixSource::Gaussian { m, n, density, .. } = self.source {
            if !(density > 0.0 && density <= 1.0) {
                return bad("density must lie in (0, 1]");
            }
            if m == 0 || n == 0 {
                return bad("matrix dimensions must be positive");
            }
        }
        if self.blocks == BlockCount::Fixed(0) {
            return bad("block count must be at least 1");
        }
        for spec in &self.methods {
            if let Some(w) = spec.omega {
                if !(w > 0.0 && w < 2.0) {
                    return Err(HarnessError::InvalidSpec(format!(
                        "omega = {w} is outside (0, 2)"
                    )));
                }
            }
        }
        self.stop.validate()?;
        self.lsq.validate()?;
        Ok(())
    }
}

/// Matrix metadata as reported next to the timings.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixInfo {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    /// `nnz / (m n)` after normalization.
    pub density: f64,
    pub spectral_norm_sq: f64,
    /// `sigma_max / sigma_min` from the dense SVD; `None` above the dense cap.
    pub condition: Option<f64>,
    pub t: usize,
    pub removed_zero_rows: usize,
}

/// Everything that is fixed across repetitions: matrix, partition, reference solver.
#[derive(Debug)]
pub struct PreparedExperiment {
    pub info: MatrixInfo,
    pub partition: Arc<Partition>,
    pub factory: SystemFactory,
}

impl PreparedExperiment {
    pub fn matrix(&self) -> &Arc<SparseMatrix> {
        self.factory.matrix()
    }

    pub fn method(&self, spec: &MethodSpec, lsq: LsqConfig) -> Method {
        let mut method = Method::new(spec.kind);
        if spec.kind.needs_partition() {
            method.partition = Some(self.partition.clone());
        }
        if spec.kind == MethodKind::Mrabk {
            method.omega = Some(spec.omega.unwrap_or(1.0));
        }
        method.lsq = lsq;
        method
    }

    /// One solve on the system of repetition `rep`.
    pub fn solve_once(
        &self,
        spec: &ExperimentSpec,
        method: &MethodSpec,
        rep: usize,
    ) -> Result<SolveReport, HarnessError> {
        let seed = spec.seed ^ rep as u64;
        let sys = self.factory.system(seed)?;
        Ok(solve(&sys, &self.method(method, spec.lsq), &spec.stop, seed)?)
    }

    /// Runs every repetition. Systems are built outside the timed region; methods run one
    /// after another on the same system.
    pub fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentResult, HarnessError> {
        spec.validate()?;
        let mut results: Vec<MethodResult> = spec
            .methods
            .iter()
            .map(|&spec| MethodResult::new(spec))
            .collect();
        let methods: Vec<Method> = spec
            .methods
            .iter()
            .map(|m| self.method(m, spec.lsq))
            .collect();
        for rep in 0..spec.repetitions {
            let seed = spec.seed ^ rep as u64;
            let sys = self.factory.system(seed)?;
            for (method, result) in methods.iter().zip(results.iter_mut()) {
                match solve(&sys, method, &spec.stop, seed) {
                    Ok(report) => result.record(&report),
                    Err(e) => {
                        log::warn!("{} repetition {rep}: {e}", result.spec.label());
                        result.failures.push(format!("repetition {rep}: {e}"));
                    }
                }
            }
        }
        let speedups = SpeedUps::from_results(&results);
        Ok(ExperimentResult {
            matrix: self.info.clone(),
            methods: results,
            speedups,
        })
    }
}

/// Loads, optionally normalizes, picks `t`, partitions and factors the matrix.
pub fn prepare_experiment(spec: &ExperimentSpec) -> Result<PreparedExperiment, HarnessError> {
    spec.validate()?;
    let raw = spec.source.load()?;
    let (matrix, removed_zero_rows) = if spec.normalize {
        let norm = normalize_rows(&raw)?;
        let removed = norm.removed_rows(raw.nrows());
        (norm.matrix, removed)
    } else {
        (raw, 0)
    };
    if matrix.nnz() == 0 {
        return Err(HarnessError::EmptyMatrix);
    }
    let est = spectral_norm_sq(&matrix, POWER_TOL, POWER_MAX_ITER)?;
    let t = match spec.blocks {
        BlockCount::Auto => block_count_for(est.value, matrix.nrows()),
        BlockCount::Fixed(t) => t,
    };
    let partition = Arc::new(Partition::randomized(matrix.nrows(), t, spec.partition_seed)?);
    let matrix = Arc::new(matrix);
    let factory = SystemFactory::new(matrix.clone(), spec.dense_cap, spec.iterative_fallback)?;
    let info = MatrixInfo {
        name: spec.source.name(),
        m: matrix.nrows(),
        n: matrix.ncols(),
        nnz: matrix.nnz(),
        density: matrix.density(),
        spectral_norm_sq: est.value,
        condition: factory.factorization().map(|f| f.condition_number()),
        t,
        removed_zero_rows,
    };
    Ok(PreparedExperiment {
        info,
        partition,
        factory,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, HarnessError> {
    prepare_experiment(spec)?.run(spec)
}

/// Per-repetition outcomes of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub spec: MethodSpec,
    pub iterations: Vec<usize>,
    pub seconds: Vec<f64>,
    pub final_rse: Vec<f64>,
    pub terminations: Vec<Termination>,
    /// Inner-solver failures and solve errors, one message per affected repetition.
    pub failures: Vec<String>,
}

impl MethodResult {
    fn new(spec: MethodSpec) -> Self {
        Self {
            spec,
            iterations: Vec::new(),
            seconds: Vec::new(),
            final_rse: Vec::new(),
            terminations: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, report: &SolveReport) {
        self.iterations.push(report.iterations);
        self.seconds.push(report.wall_seconds);
        self.final_rse.push(report.final_rse);
        self.terminations.push(report.termination);
        if let Some(msg) = &report.inner_failure {
            self.failures
                .push(format!("repetition {}: {msg}", self.iterations.len() - 1));
        }
    }

    /// Mean iteration count over the repetitions that ran; NaN if none did.
    pub fn mean_iterations(&self) -> f64 {
        mean(self.iterations.iter().map(|&k| k as f64))
    }

    pub fn mean_seconds(&self) -> f64 {
        mean(self.seconds.iter().copied())
    }

    pub fn mean_final_rse(&self) -> f64 {
        mean(self.final_rse.iter().copied())
    }

    pub fn all_converged(&self) -> bool {
        !self.terminations.is_empty()
            && self.failures.is_empty()
            && self.terminations.iter().all(|&t| t == Termination::Converged)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// `SU1 = CPU(MRK)/CPU(MRBK)`, `SU2 = CPU(GRBK)/CPU(MRBK)`, `SU3 = CPU(MRBK)/CPU(MRABK)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpeedUps {
    pub su1: Option<f64>,
    pub su2: Option<f64>,
    pub su3: Option<f64>,
}

impl SpeedUps {
    /// Uses the first result of each kind; a ratio is present only when both operands ran.
    pub fn from_results(results: &[MethodResult]) -> Self {
        let cpu = |kind: MethodKind| {
            results
                .iter()
                .find(|r| r.spec.kind == kind)
                .filter(|r| !r.seconds.is_empty())
                .map(|r| r.mean_seconds())
        };
        let ratio = |num: MethodKind, den: MethodKind| Some(cpu(num)? / cpu(den)?);
        Self {
            su1: ratio(MethodKind::Mrk, MethodKind::Mrbk),
            su2: ratio(MethodKind::Grbk, MethodKind::Mrbk),
            su3: ratio(MethodKind::Mrbk, MethodKind::Mrabk),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub matrix: MatrixInfo,
    pub methods: Vec<MethodResult>,
    pub speedups: SpeedUps,
}

impl ExperimentResult {
    pub fn method(&self, kind: MethodKind) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.spec.kind == kind)
    }
}
