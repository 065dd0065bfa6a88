use std::path::Path;
use std::process::Command as Process;

use clap::error::ErrorKind;

use klab::cli::{execute, parse_args, run, CliError, Command};
use klab::harness::{read_matrix_market, read_trace_csv, write_matrix_market, BlockCount, MatrixSource};
use klab::{MethodKind, SparseMatrix};

fn argv(s: &str) -> Vec<String> {
    std::iter::once("klab".to_string())
        .chain(s.split_whitespace().map(String::from))
        .collect()
}

fn exec(s: &str) -> (Result<(), CliError>, String) {
    let plan = parse_args(argv(s)).unwrap();
    let mut out = Vec::new();
    let res = execute(&plan, &mut out);
    (res, String::from_utf8(out).unwrap())
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_klab"))
}

#[test]
fn bench_flags_become_a_spec() {
    let plan = parse_args(argv(
        "bench --gaussian 6000x1000 --density 0.01 --methods mrk,mrbk,mrabk",
    ))
    .unwrap();
    let Command::Bench(spec) = plan.command else {
        panic!("expected bench");
    };
    match spec.source {
        MatrixSource::Gaussian { m, n, density, seed } => {
            assert_eq!((m, n, density, seed), (6000, 1000, 0.01, 0));
        }
        other => panic!("unexpected source {other:?}"),
    }
    let kinds: Vec<MethodKind> = spec.methods.iter().map(|m| m.kind).collect();
    assert_eq!(kinds, vec![MethodKind::Mrk, MethodKind::Mrbk, MethodKind::Mrabk]);
    assert_eq!(spec.repetitions, 20);
    assert_eq!(spec.blocks, BlockCount::Auto);
    assert_eq!(spec.stop.rse_tol, 1e-6);
    assert!(spec.normalize);
    assert!(plan.out.is_none());
}

#[test]
fn solve_on_matrix_market_uses_auto_blocks() {
    let plan = parse_args(argv("solve --mm trefethen_700.mtx --method mrbk")).unwrap();
    let Command::Solve { spec, rhs, assert_consistent } = plan.command else {
        panic!("expected solve");
    };
    assert!(matches!(spec.source, MatrixSource::MatrixMarket(ref p) if p == Path::new("trefethen_700.mtx")));
    assert_eq!(spec.blocks, BlockCount::Auto);
    assert_eq!(spec.methods.len(), 1);
    assert_eq!(spec.methods[0].kind, MethodKind::Mrbk);
    assert!(rhs.is_none());
    assert!(!assert_consistent);
}

#[test]
fn fixed_blocks_and_omega() {
    let plan = parse_args(argv("solve --gaussian 50x10 --method mrabk --omega 0.7 --blocks 4")).unwrap();
    let Command::Solve { spec, .. } = plan.command else {
        panic!("expected solve");
    };
    assert_eq!(spec.blocks, BlockCount::Fixed(4));
    assert_eq!(spec.methods[0].omega, Some(0.7));
}

#[test]
fn usage_errors() {
    for bad in [
        "solve --gaussian 50x10 --method mrabk --omega 2.5",
        "solve --gaussian 50x10 --mm a.mtx",
        "solve --gaussian 50x10 --frobnicate",
        "solve --gaussian 50x0",
        "solve --gaussian 50by10",
        "solve --gaussian 50x10 --density 1.5",
        "solve --gaussian 50x10 --method nope",
        "solve --gaussian 50x10 --blocks zero",
        "verify --gaussian 50x10 --methods rk",
        "bench --gaussian 50x10 --repetitions 0",
        "frobnicate",
    ] {
        assert!(parse_args(argv(bad)).is_err(), "{bad}");
        assert_eq!(run(argv(bad)), 2, "{bad}");
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(parse_args(argv("--help")).unwrap_err().kind(), ErrorKind::DisplayHelp);
    assert_eq!(parse_args(argv("bench --help")).unwrap_err().kind(), ErrorKind::DisplayHelp);
    assert_eq!(parse_args(argv("--version")).unwrap_err().kind(), ErrorKind::DisplayVersion);
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["solve", "bench", "paving", "verify", "gen"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn same_argv_gives_the_same_plan() {
    let a = "bench --gaussian 300x60 --methods rk,grbk --seed 9 --partition-seed 3";
    let p = format!("{:?}", parse_args(argv(a)).unwrap());
    let q = format!("{:?}", parse_args(argv(a)).unwrap());
    assert_eq!(p, q);
}

#[test]
fn solve_prints_a_summary() {
    let (res, out) = exec("solve --gaussian 200x40 --density 0.1 --method mrbk");
    res.unwrap();
    assert!(out.contains("MRBK"), "{out}");
    assert!(out.contains("converged"), "{out}");
}

#[test]
fn verify_small_system_passes_and_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = format!(
        "verify --gaussian 200x50 --density 0.1 --repetitions 2 --out {}",
        dir.path().display()
    );
    assert_eq!(run(argv(&cmd)), 0);
    for m in ["mrbk", "mrabk"] {
        let trace = read_trace_csv(&dir.path().join(format!("trace_{m}.csv"))).unwrap();
        assert!(!trace.is_empty());
        assert_eq!(trace[0].iteration, 1);
    }
}

#[test]
fn bench_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = format!(
        "bench --gaussian 150x30 --density 0.2 --methods mrk,mrbk,mrabk --repetitions 2 --out {}",
        dir.path().display()
    );
    let (res, out) = exec(&cmd);
    res.unwrap();
    assert!(out.contains("SU3"), "{out}");
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("MRABK"));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn paving_writes_partition_file() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = format!(
        "paving --gaussian 120x30 --density 0.2 --blocks 3 --out {}",
        dir.path().display()
    );
    let (res, out) = exec(&cmd);
    res.unwrap();
    assert!(out.contains("beta"), "{out}");
    let p = klab::Partition::read(&dir.path().join("partition.txt")).unwrap();
    assert_eq!(p.t(), 3);
    assert!(dir.path().join("paving.txt").exists());
}

#[test]
fn gen_round_trips_through_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.mtx");
    let cmd = format!("gen --gaussian 40x12 --density 0.2 --seed 5 --out {}", path.display());
    exec(&cmd).0.unwrap();
    let a = read_matrix_market(&path).unwrap();
    let want = klab::harness::generate_sparse_gaussian(40, 12, 0.2, 5).unwrap();
    assert_eq!(a, want);
    let bits = |m: &SparseMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&want));
}

fn write_small_system(dir: &Path, rhs: &[f64]) -> (String, String) {
    let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let mm = dir.join("a.mtx");
    write_matrix_market(&a, &mm).unwrap();
    let rhs_path = dir.join("b.txt");
    let text: Vec<String> = rhs.iter().map(|v| v.to_string()).collect();
    std::fs::write(&rhs_path, text.join("\n")).unwrap();
    (mm.display().to_string(), rhs_path.display().to_string())
}

#[test]
fn consistent_rhs_solves() {
    let dir = tempfile::tempdir().unwrap();
    let (mm, rhs) = write_small_system(dir.path(), &[1.0, 2.0, 3.0]);
    let cmd = format!("solve --mm {mm} --rhs {rhs} --raw --assert-consistent --method mrk");
    let (res, _) = exec(&cmd);
    res.unwrap();
}

#[test]
fn inconsistent_rhs_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let (mm, rhs) = write_small_system(dir.path(), &[1.0, 2.0, 10.0]);
    let cmd = format!("solve --mm {mm} --rhs {rhs} --raw --assert-consistent");
    let (res, _) = exec(&cmd);
    let err = res.unwrap_err();
    assert_eq!(err.exit_code(), 5);
    assert!(err.to_string().contains("consistency check"), "{err}");

    let out = bin().args(argv(&cmd).into_iter().skip(1)).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("consistency check"));
}

#[test]
fn missing_files_are_io_errors() {
    let (res, _) = exec("solve --mm /nonexistent/a.mtx");
    assert_eq!(res.unwrap_err().exit_code(), 3);
    let dir = tempfile::tempdir().unwrap();
    let (mm, _) = write_small_system(dir.path(), &[1.0, 2.0, 3.0]);
    let (res, _) = exec(&format!("solve --mm {mm} --rhs /nonexistent/b.txt"));
    assert_eq!(res.unwrap_err().exit_code(), 3);
}
