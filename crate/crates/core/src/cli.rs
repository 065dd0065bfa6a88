//! Command-line front end: `solve`, `bench`, `paving`, `verify` and `gen`.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or input format, 4 inner-solver failure,
//! 5 verification failure (bound violations or a failed consistency check), 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use crate::harness::{
    generate_sparse_gaussian, normalize_rows, prepare_experiment, render_report,
    verify_theorem_bounds, write_matrix_market, write_report, write_trace_csv, BlockCount,
    ExperimentSpec, HarnessError, MatrixSource, MethodSpec, PreparedExperiment,
};
use crate::partition::{convergence_factors, paving_bounds, PartitionError};
use crate::solvers::{solve, LinearSystem, MethodKind, SolveError, StopRule, Termination};
use crate::sparsela::{least_squares_apply, norm_sq, DenseCap, LinalgError, LsqConfig};

#[derive(Debug, Parser)]
#[command(name = "klab", version, about = "Block Kaczmarz solvers and benchmarks for sparse consistent systems")]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Solve one consistent system and report the iteration count.
    Solve(SolveArgs),
    /// Average iteration counts and timings of several methods over repeated systems.
    Bench(BenchArgs),
    /// Print the paving bounds and convergence factors of the randomized partition.
    Paving(PavingArgs),
    /// Check every MRBK / MRABK step against its contraction bound.
    Verify(VerifyArgs),
    /// Write a sparse Gaussian test matrix in Matrix Market format.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Generate an M x N sparse Gaussian matrix, e.g. `6000x1000`.
    #[arg(long, value_name = "MxN", conflicts_with = "mm")]
    gaussian: Option<String>,
    /// Fraction of nonzero entries of the generated matrix.
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    /// Seed of the generated matrix.
    #[arg(long, default_value_t = 0)]
    matrix_seed: u64,
    /// Read the matrix from a Matrix Market coordinate file.
    #[arg(long, value_name = "PATH")]
    mm: Option<PathBuf>,
    /// Keep zero rows and the original row scaling.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Relaxation of MRABK, in (0, 2).
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Stop once the relative squared error drops below this.
    #[arg(long, default_value_t = 1e-6)]
    rse_tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iterations: usize,
    /// Relative residual tolerance used when no reference solution is known.
    #[arg(long, default_value_t = 1e-8)]
    residual_tol: f64,
    /// Number of blocks: `auto` for ceil(||A||_2^2) or a positive integer.
    #[arg(long, default_value = "auto")]
    blocks: String,
    /// Base seed of the solutions x* and of the randomized selections.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the row partition.
    #[arg(long, default_value_t = 0)]
    partition_seed: u64,
    /// Directory for reports and traces; nothing is written without it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// One of kaczmarz, rk, mrk, grk, rbk, gbk, grbk, mrbk, mrabk.
    #[arg(long, default_value = "mrbk")]
    method: String,
    /// Right-hand side, one value per line. Without it b = A x* for a random x*.
    #[arg(long, value_name = "PATH")]
    rhs: Option<PathBuf>,
    /// Fail unless A x = b is solvable to a relative residual of 1e-8.
    #[arg(long)]
    assert_consistent: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated method names.
    #[arg(long, default_value = "mrk,grk,rbk,gbk,grbk,mrbk,mrabk")]
    methods: String,
    #[arg(long, default_value_t = 20)]
    repetitions: usize,
}

#[derive(Debug, Args)]
struct PavingArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated subset of mrbk, mrabk.
    #[arg(long, default_value = "mrbk,mrabk")]
    methods: String,
    /// Number of random right-hand sides to check.
    #[arg(long, default_value_t = 20)]
    repetitions: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_name = "MxN")]
    gaussian: String,
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop zero rows and scale rows to unit norm before writing.
    #[arg(long)]
    normalize: bool,
    /// Output `.mtx` path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

/// A validated command.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub command: Command,
    /// Output directory (`gen` carries its own file path instead).
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Command {
    Solve {
        spec: ExperimentSpec,
        rhs: Option<PathBuf>,
        assert_consistent: bool,
    },
    Bench(ExperimentSpec),
    Paving(ExperimentSpec),
    Verify(ExperimentSpec),
    Gen {
        m: usize,
        n: usize,
        density: f64,
        seed: u64,
        normalize: bool,
        path: PathBuf,
    },
}

fn usage(msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(ErrorKind::ValueValidation, msg)
}

fn parse_shape(s: &str) -> Result<(usize, usize), clap::Error> {
    let bad = || usage(format!("`{s}` is not of the form MxN"));
    let (m, n) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let m: usize = m.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if m == 0 || n == 0 {
        return Err(usage("matrix dimensions must be positive"));
    }
    Ok((m, n))
}

fn parse_density(d: f64) -> Result<f64, clap::Error> {
    if d > 0.0 && d <= 1.0 {
        Ok(d)
    } else {
        Err(usage(format!("density {d} is outside (0, 1]")))
    }
}

fn parse_methods(list: &str, omega: f64) -> Result<Vec<MethodSpec>, clap::Error> {
    let methods = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let kind: MethodKind = s.parse().map_err(usage)?;
            Ok(if kind == MethodKind::Mrabk {
                MethodSpec::with_omega(kind, omega)
            } else {
                MethodSpec::new(kind)
            })
        })
        .collect::<Result<Vec<_>, clap::Error>>()?;
    if methods.is_empty() {
        return Err(usage("no methods given"));
    }
    Ok(methods)
}

fn spec_from(run: &RunArgs, methods: Vec<MethodSpec>) -> Result<ExperimentSpec, clap::Error> {
    let src = &run.source;
    let source = match (&src.gaussian, &src.mm) {
        (Some(_), Some(_)) => return Err(usage("--gaussian and --mm are mutually exclusive")),
        (None, None) => return Err(usage("one of --gaussian or --mm is required")),
        (Some(shape), None) => {
            let (m, n) = parse_shape(shape)?;
            MatrixSource::Gaussian {
                m,
                n,
                density: parse_density(src.density)?,
                seed: src.matrix_seed,
            }
        }
        (None, Some(path)) => MatrixSource::MatrixMarket(path.clone()),
    };
    if !(run.omega > 0.0 && run.omega < 2.0) {
        return Err(usage(format!("--omega {} is outside (0, 2)", run.omega)));
    }
    let blocks = match run.blocks.as_str() {
        "auto" => BlockCount::Auto,
        s => match s.parse::<usize>() {
            Ok(t) if t >= 1 => BlockCount::Fixed(t),
            _ => return Err(usage(format!("--blocks expects `auto` or a positive integer, got `{s}`"))),
        },
    };
    let stop = StopRule {
        rse_tol: run.rse_tol,
        max_iterations: run.max_iterations,
        residual_tol: Some(run.residual_tol),
    };
    stop.validate().map_err(usage)?;
    let mut spec = ExperimentSpec::new(source, methods);
    spec.stop = stop;
    spec.seed = run.seed;
    spec.partition_seed = run.partition_seed;
    spec.blocks = blocks;
    spec.normalize = !src.raw;
    Ok(spec)
}

/// Parses `argv` (including the program name). Help and version requests come back as
/// errors of kind `DisplayHelp` / `DisplayVersion`.
pub fn parse_args<I, T>(argv: I) -> Result<RunPlan, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let plan = match cli.command {
        CommandArgs::Solve(a) => {
            let kind: MethodKind = a.method.parse().map_err(usage)?;
            let spec = spec_from(&a.run, parse_methods(kind.name(), a.run.omega)?)?;
            RunPlan {
                out: a.run.out.clone(),
                command: Command::Solve {
                    spec,
                    rhs: a.rhs,
                    assert_consistent: a.assert_consistent,
                },
            }
        }
        CommandArgs::Bench(a) => {
            let mut spec = spec_from(&a.run, parse_methods(&a.methods, a.run.omega)?)?;
            spec.repetitions = a.repetitions;
            RunPlan {
                out: a.run.out.clone(),
                command: Command::Bench(spec),
            }
        }
        CommandArgs::Paving(a) => RunPlan {
            out: a.run.out.clone(),
            command: Command::Paving(spec_from(&a.run, vec![MethodSpec::new(MethodKind::Mrbk)])?),
        },
        CommandArgs::Verify(a) => {
            let methods = parse_methods(&a.methods, a.run.omega)?;
            if let Some(m) = methods
                .iter()
                .find(|m| !matches!(m.kind, MethodKind::Mrbk | MethodKind::Mrabk))
            {
                return Err(usage(format!("verify supports mrbk and mrabk, not {}", m.kind)));
            }
            let mut spec = spec_from(&a.run, methods)?;
            spec.repetitions = a.repetitions;
            RunPlan {
                out: a.run.out.clone(),
                command: Command::Verify(spec),
            }
        }
        CommandArgs::Gen(a) => {
            let (m, n) = parse_shape(&a.gaussian)?;
            RunPlan {
                out: None,
                command: Command::Gen {
                    m,
                    n,
                    density: parse_density(a.density)?,
                    seed: a.seed,
                    normalize: a.normalize,
                    path: a.out,
                },
            }
        }
    };
    if let Command::Solve { spec, .. }
    | Command::Bench(spec)
    | Command::Paving(spec)
    | Command::Verify(spec) = &plan.command
    {
        spec.validate().map_err(usage)?;
    }
    Ok(plan)
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("inner solver failure: {0}")]
    InnerFailure(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::InnerFailure(_) => 4,
            CliError::Verification(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            HarnessError::Io { .. } | HarnessError::Csv { .. } | HarnessError::Parse { .. } => {
                CliError::Io(msg)
            }
            HarnessError::Partition(PartitionError::Io { .. } | PartitionError::Parse { .. }) => {
                CliError::Io(msg)
            }
            HarnessError::InvalidSpec(_) => CliError::Usage(msg),
            HarnessError::Solve(e) => e.into(),
            _ => CliError::Other(msg),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let msg = e.to_string();
        match e {
            SolveError::InnerFailure { .. } => CliError::InnerFailure(msg),
            SolveError::NotConsistent { .. } | SolveError::Inconsistent { .. } => {
                CliError::Verification(format!("consistency check: {msg}"))
            }
            SolveError::InvalidMethod(_) | SolveError::InvalidStopRule(_) => CliError::Usage(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Other(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn out_dir(out: &Option<PathBuf>) -> Result<Option<&Path>, CliError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

/// Reads one value per line; blank lines and `#`/`%` comments are skipped.
fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#') && !l.starts_with('%'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| CliError::Io(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn print_line(w: &mut dyn Write, s: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(w, "{s}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

/// Runs `plan`, writing human-readable output to `w`.
pub fn execute(plan: &RunPlan, w: &mut dyn Write) -> Result<(), CliError> {
    match &plan.command {
        Command::Gen {
            m,
            n,
            density,
            seed,
            normalize,
            path,
        } => {
            let mut a = generate_sparse_gaussian(*m, *n, *density, *seed)?;
            if *normalize {
                a = normalize_rows(&a)?.matrix;
            }
            write_matrix_market(&a, path)?;
            print_line(
                w,
                format_args!("wrote {} ({} x {}, {} nonzeros)", path.display(), a.nrows(), a.ncols(), a.nnz()),
            )
        }
        Command::Solve {
            spec,
            rhs,
            assert_consistent,
        } => execute_solve(spec, rhs.as_deref(), *assert_consistent, &plan.out, w),
        Command::Bench(spec) => {
            let prepared = prepare_experiment(spec)?;
            let result = prepared.run(spec)?;
            write!(w, "{}", render_report(std::slice::from_ref(&result)))
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
            if let Some(dir) = out_dir(&plan.out)? {
                write_report(std::slice::from_ref(&result), &dir.join("report.txt"))?;
            }
            let failures: Vec<String> = result
                .methods
                .iter()
                .flat_map(|m| m.failures.iter().map(move |f| format!("{}: {f}", m.spec.label())))
                .collect();
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::InnerFailure(failures.join("; ")))
            }
        }
        Command::Paving(spec) => execute_paving(spec, &plan.out, w),
        Command::Verify(spec) => execute_verify(spec, &plan.out, w),
    }
}

fn describe(w: &mut dyn Write, prepared: &PreparedExperiment) -> Result<(), CliError> {
    let info = &prepared.info;
    print_line(
        w,
        format_args!(
            "{}: {} x {}, {} nonzeros, ||A||_2^2 = {:.6}, t = {}",
            info.name, info.m, info.n, info.nnz, info.spectral_norm_sq, info.t
        ),
    )
}

fn execute_solve(
    spec: &ExperimentSpec,
    rhs: Option<&Path>,
    assert_consistent: bool,
    out: &Option<PathBuf>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let mut spec = spec.clone();
    // A user-supplied right-hand side needs no dense reference solution.
    if rhs.is_some() {
        spec.dense_cap = DenseCap(0);
        spec.iterative_fallback = true;
    }
    let prepared = prepare_experiment(&spec)?;
    describe(w, &prepared)?;
    let method_spec = spec.methods[0];
    let method = prepared.method(&method_spec, spec.lsq);
    let sys = match rhs {
        None => prepared.factory.system(spec.seed)?,
        Some(path) => {
            let b = read_vector(path)?;
            let a = prepared.matrix().clone();
            if b.len() != a.nrows() {
                return Err(CliError::Io(format!(
                    "{}: expected {} values, found {}",
                    path.display(),
                    a.nrows(),
                    b.len()
                )));
            }
            if assert_consistent {
                let ls = least_squares_apply(
                    &a.full_view(),
                    &b,
                    &LsqConfig {
                        rel_tolerance: 1e-12,
                        max_inner_iterations: Some(20 * a.nrows().max(a.ncols()).max(100)),
                    },
                )?;
                let ax = a.spmv(&ls.solution)?;
                let res: f64 = b.iter().zip(&ax).map(|(p, q)| (p - q) * (p - q)).sum();
                let limit = 1e-8 * norm_sq(&b).sqrt();
                if res.sqrt() > limit {
                    return Err(CliError::Verification(format!(
                        "consistency check: least-squares residual {:e} exceeds 1e-8 ||b|| = {limit:e}",
                        res.sqrt()
                    )));
                }
            }
            LinearSystem::new(a, b, None, assert_consistent)?
        }
    };
    let report = solve(&sys, &method, &spec.stop, spec.seed)?;
    print_line(
        w,
        format_args!(
            "{}: {} after {} iterations, {:.4}s, RSE {:.3e}",
            method_spec.label(),
            report.termination,
            report.iterations,
            report.wall_seconds,
            report.final_rse
        ),
    )?;
    if let Some(dir) = out_dir(out)? {
        let path = dir.join(format!("trace_{}.csv", method_spec.kind.name()));
        write_trace_csv(&report, &path)?;
        print_line(w, format_args!("trace written to {}", path.display()))?;
    }
    match report.termination {
        Termination::InnerFailure => Err(CliError::InnerFailure(
            report.inner_failure.unwrap_or_default(),
        )),
        _ => Ok(()),
    }
}

fn execute_paving(
    spec: &ExperimentSpec,
    out: &Option<PathBuf>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let prepared = prepare_experiment(spec)?;
    describe(w, &prepared)?;
    let bounds = paving_bounds(prepared.matrix(), &prepared.partition, spec.dense_cap)
        .map_err(HarnessError::from)?;
    let omega = spec.methods[0].omega.unwrap_or(1.0);
    let f = convergence_factors(&bounds, &prepared.partition, omega);
    let rows = [
        ("alpha".to_string(), format!("{:.6e}", bounds.alpha)),
        ("beta".to_string(), format!("{:.6e}", bounds.beta)),
        ("sigma_min^2(A)".to_string(), format!("{:.6e}", bounds.sigma_min_sq)),
        ("zeta".to_string(), format!("{:.6e}", bounds.zeta)),
        ("rho_MRBK".to_string(), format!("{:.12}", f.rho_mrbk)),
        (format!("rho_MRABK(w={omega})"), format!("{:.12}", f.rho_mrabk)),
        ("rho_RBK".to_string(), format!("{:.12}", f.rho_rbk)),
        ("rho_GRBK".to_string(), format!("{:.12}", f.rho_grbk)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let lines: Vec<String> = rows.iter().map(|(k, v)| format!("{k:<width$}  {v}")).collect();
    for l in &lines {
        print_line(w, l)?;
    }
    if let Some(dir) = out_dir(out)? {
        let path = dir.join("partition.txt");
        prepared
            .partition
            .write(&path)
            .map_err(HarnessError::from)?;
        let path = dir.join("paving.txt");
        fs::write(&path, lines.join("\n") + "\n").map_err(io_err(&path))?;
    }
    Ok(())
}

fn execute_verify(
    spec: &ExperimentSpec,
    out: &Option<PathBuf>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let prepared = prepare_experiment(spec)?;
    describe(w, &prepared)?;
    let bounds = paving_bounds(prepared.matrix(), &prepared.partition, spec.dense_cap)
        .map_err(HarnessError::from)?;
    let dir = out_dir(out)?;
    let mut violations = Vec::new();
    for method_spec in &spec.methods {
        let method = prepared.method(method_spec, spec.lsq);
        let mut worst: f64 = 0.0;
        let mut steps = 0;
        let mut factor = 0.0;
        for rep in 0..spec.repetitions {
            let report = prepared.solve_once(spec, method_spec, rep)?;
            let check = verify_theorem_bounds(&report, &bounds, &method)?;
            worst = worst.max(check.max_ratio);
            steps += check.steps_checked;
            factor = check.steady_factor;
            for v in &check.violations {
                violations.push(format!(
                    "{} repetition {rep} step {}: ratio {:.12} > factor {:.12}",
                    method_spec.label(),
                    v.step,
                    v.ratio,
                    v.factor
                ));
            }
            if let Some(dir) = dir {
                if rep == 0 {
                    write_trace_csv(&report, &dir.join(format!("trace_{}.csv", method_spec.kind.name())))?;
                }
            }
        }
        print_line(
            w,
            format_args!(
                "{}: {steps} steps, max ratio {worst:.12}, steady factor {factor:.12}",
                method_spec.label()
            ),
        )?;
    }
    if violations.is_empty() {
        print_line(w, "all contraction bounds hold")
    } else {
        for v in &violations {
            print_line(w, v)?;
        }
        Err(CliError::Verification(format!(
            "{} steps exceed their bound",
            violations.len()
        )))
    }
}

/// Parses and executes `argv`, printing to stdout/stderr. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let plan = match parse_args(argv) {
        Ok(plan) => plan,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&plan, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
