//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criterion 7 reads the Trefethen 700 matrix from `KLAB_TREFETHEN_700` when set and
//! otherwise generates it, writes it as Matrix Market and reads it back.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use klab::harness::{
    generate_sparse_gaussian, normalize_rows, read_matrix_market, run_experiment, trefethen,
    verify_theorem_bounds, write_matrix_market, ExperimentSpec, MatrixSource, MethodSpec,
    SystemFactory, BOUND_SLACK,
};
use klab::partition::{convergence_factors, default_block_count, paving_bounds};
use klab::solvers::{
    block_residual_norms_sq, mrabk_step, mrbk_step, mrk_step, rbk_step, solve,
};
use klab::{
    DenseCap, LinearSystem, LsqConfig, Method, MethodKind, Partition, PavingBounds,
    SparseMatrix, StopRule, Termination,
};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// A normalized random consistent system with its partition and paving bounds.
struct Instance {
    label: String,
    sys: LinearSystem,
    partition: Arc<Partition>,
    bounds: PavingBounds,
}

fn contraction_instances() -> Vec<Instance> {
    (0..20u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0000 + i);
            let m = [100, 200][(i % 2) as usize];
            let n = [20, 50][((i / 2) % 2) as usize];
            let density = rng.random_range(0.05..=0.2);
            let raw = generate_sparse_gaussian(m, n, density, 7000 + i).unwrap();
            let a = Arc::new(normalize_rows(&raw).unwrap().matrix);
            let t = default_block_count(&a).unwrap();
            let partition = Arc::new(Partition::randomized(a.nrows(), t, i).unwrap());
            let bounds = paving_bounds(&a, &partition, DenseCap::DEFAULT).unwrap();
            let sys = SystemFactory::new(a.clone(), DenseCap::DEFAULT, false)
                .unwrap()
                .system(i)
                .unwrap();
            Instance {
                label: format!("#{i} {}x{n} d={density:.3} t={t}", a.nrows()),
                sys,
                partition,
                bounds,
            }
        })
        .collect()
}

fn deep_stop() -> StopRule {
    StopRule {
        rse_tol: 1e-14,
        max_iterations: 20_000,
        residual_tol: None,
    }
}

fn time_limit(elapsed: Duration, limit_secs: u64) -> (bool, String) {
    let ok = elapsed.as_secs_f64() < limit_secs as f64;
    (ok, format!("{:.1}s of {limit_secs}s", elapsed.as_secs_f64()))
}

fn criterion_1(instances: &[Instance]) -> Outcome {
    assert_eq!(BOUND_SLACK, 1e-10);
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for inst in instances {
        let method = Method::mrbk(inst.partition.clone());
        let report = solve(&inst.sys, &method, &deep_stop(), 0).unwrap();
        let check = verify_theorem_bounds(&report, &inst.bounds, &method).unwrap();
        steps += check.steps_checked;
        worst = worst.max(check.max_ratio - check.steady_factor);
        if !check.passed() {
            failures.push(format!("{}: {:?}", inst.label, check.violations[0]));
        }
    }
    let (in_time, time) = time_limit(start.elapsed(), 60);
    Outcome::new(
        failures.is_empty() && in_time,
        format!(
            "{steps} steps, max(ratio - factor) = {worst:.3e}, {time}{}",
            first_failure(&failures)
        ),
    )
}

fn criterion_2(instances: &[Instance]) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut steps = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for inst in instances {
        for omega in [0.5, 1.0, 1.5] {
            let method = Method::mrabk(inst.partition.clone(), omega);
            let report = solve(&inst.sys, &method, &deep_stop(), 0).unwrap();
            let check = verify_theorem_bounds(&report, &inst.bounds, &method).unwrap();
            steps += check.steps_checked;
            worst = worst.max(check.max_ratio - check.steady_factor);
            if !check.passed() {
                let v = &check.violations[0];
                failures.push(format!(
                    "{} w={omega}: {} of {} steps violate, first at k={} ratio {:.6} > factor {:.6}",
                    inst.label,
                    check.violations.len(),
                    check.steps_checked,
                    v.step,
                    v.ratio,
                    v.factor
                ));
            }
        }
    }
    let (in_time, time) = time_limit(start.elapsed(), 90);
    Outcome::new(
        failures.is_empty() && in_time,
        format!(
            "{steps} steps, {} of 60 runs violate, max(ratio - steady factor) = {worst:.3e}, {time}{}",
            failures.len(),
            first_failure(&failures)
        ),
    )
}

fn first_failure(failures: &[String]) -> String {
    failures
        .first()
        .map(|f| format!("; first: {f}"))
        .unwrap_or_default()
}

fn criterion_3(instances: &[Instance]) -> Outcome {
    let lsq = LsqConfig::default();
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    let mut failures = Vec::new();
    for inst in instances {
        let x_star = inst.sys.x_star().unwrap();
        let star_sq: f64 = x_star.iter().map(|v| v * v).sum();
        let mut x = vec![0.0; inst.sys.a().ncols()];
        for _ in 0..20_000 {
            let err: f64 = x.iter().zip(x_star).map(|(p, q)| (p - q) * (p - q)).sum();
            if err < 1e-14 * star_sq {
                break;
            }
            let before = block_residual_norms_sq(&inst.sys, &x, &inst.partition).unwrap();
            let step = mrbk_step(&inst.sys, &x, &inst.partition, &lsq).unwrap();
            let after = block_residual_norms_sq(&inst.sys, &step.x, &inst.partition).unwrap();
            let ratio = (after[step.selected] / before[step.selected]).sqrt();
            steps += 1;
            worst = worst.max(ratio);
            if ratio > 1e-8 {
                failures.push(format!("{} ratio {ratio:.3e}", inst.label));
            }
            x = step.x;
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{steps} steps, worst post/pre block residual {worst:.3e} (limit 1e-8){}",
            first_failure(&failures)
        ),
    )
}

fn dense_pinv_step(a: &SparseMatrix, b: &[f64], x: &[f64], rows: &[usize]) -> Vec<f64> {
    let block = a.select_rows(rows).unwrap().to_dense();
    let ax = &block * DVector::from_column_slice(x);
    let r: Vec<f64> = rows.iter().zip(ax.iter()).map(|(&i, v)| b[i] - v).collect();
    let svd = block.svd(true, true);
    let smax = svd.singular_values.max();
    let pinv = svd.pseudo_inverse(1e-12 * smax).unwrap();
    let d = pinv * DVector::from_column_slice(&r);
    x.iter().zip(d.iter()).map(|(p, q)| p + q).collect()
}

fn brute_argmax(a: &SparseMatrix, b: &[f64], x: &[f64], p: &Partition) -> usize {
    let norms: Vec<f64> = p
        .blocks()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|&i| {
                    let dense: DMatrix<f64> = a.select_rows(&[i]).unwrap().to_dense();
                    let v = b[i] - (dense * DVector::from_column_slice(x))[0];
                    v * v
                })
                .sum()
        })
        .collect();
    let mut best = 0;
    for (i, v) in norms.iter().enumerate() {
        if *v > norms[best] {
            best = i;
        }
    }
    best
}

fn criterion_4() -> Outcome {
    let lsq = LsqConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1_e000 + trial);
        let density = [0.15, 0.4, 1.0][(trial % 3) as usize];
        let a = Arc::new(generate_sparse_gaussian(90, 10, density, 500 + trial).unwrap());
        let p = Partition::randomized(90, 3, trial).unwrap();
        let x_true: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let b = a.spmv(&x_true).unwrap();
        let sys = LinearSystem::new(a.clone(), b.clone(), None, true).unwrap();
        let x: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();

        let step = mrbk_step(&sys, &x, &p, &lsq).unwrap();
        let expected_block = brute_argmax(&a, &b, &x, &p);
        let oracle = dense_pinv_step(&a, &b, &x, p.block(expected_block));
        let d_mrbk = distance(&step.x, &oracle);

        let mut sampler = ChaCha8Rng::seed_from_u64(trial);
        let rbk = rbk_step(&sys, &x, &p, &mut sampler, &lsq).unwrap();
        let oracle_rbk = dense_pinv_step(&a, &b, &x, p.block(rbk.selected));
        let d_rbk = distance(&rbk.x, &oracle_rbk);

        worst = worst.max(d_mrbk).max(d_rbk);
        if step.selected != expected_block || d_mrbk > 1e-8 || d_rbk > 1e-8 {
            failures.push(format!(
                "trial {trial}: block {} vs {expected_block}, |dx| {d_mrbk:.2e} / {d_rbk:.2e}",
                step.selected
            ));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "50 blocks of 30x10, worst |dx| = {worst:.3e} (limit 1e-8){}",
            first_failure(&failures)
        ),
    )
}

fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn criterion_5() -> Outcome {
    let lsq = LsqConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for trial in 0..10u64 {
        let raw = generate_sparse_gaussian(80, 30, 0.2, 900 + trial).unwrap();
        let a = Arc::new(normalize_rows(&raw).unwrap().matrix);
        let sys = SystemFactory::new(a.clone(), DenseCap::DEFAULT, false)
            .unwrap()
            .system(trial)
            .unwrap();
        let singles = Partition::singletons(a.nrows()).unwrap();
        let n = a.ncols();
        let (mut x_mrk, mut x_mrbk, mut x_mrabk) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..100 {
            x_mrk = mrk_step(&sys, &x_mrk).unwrap().x;
            x_mrbk = mrbk_step(&sys, &x_mrbk, &singles, &lsq).unwrap().x;
            x_mrabk = mrabk_step(&sys, &x_mrabk, &singles, 1.0).unwrap().x;
            let d1 = distance(&x_mrk, &x_mrbk);
            let d2 = distance(&x_mrk, &x_mrabk);
            worst = worst.max(d1).max(d2);
            if d1 > 1e-12 || d2 > 1e-12 {
                failures.push(format!("trial {trial} step {k}: {d1:.2e} / {d2:.2e}"));
                break;
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "10 systems x 100 steps, worst |x - x_MRK| = {worst:.3e} (limit 1e-12){}",
            first_failure(&failures)
        ),
    )
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut spec = ExperimentSpec::new(
        MatrixSource::Gaussian {
            m: 6000,
            n: 1000,
            density: 0.01,
            seed: 0,
        },
        [MethodKind::Mrk, MethodKind::Mrbk, MethodKind::Mrabk]
            .map(MethodSpec::new)
            .to_vec(),
    );
    spec.repetitions = 20;
    spec.dense_cap = DenseCap::DEFAULT;
    let result = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("experiment failed: {e}")),
    };
    let get = |k| result.method(k).unwrap();
    let (mrk, mrbk, mrabk) = (
        get(MethodKind::Mrk),
        get(MethodKind::Mrbk),
        get(MethodKind::Mrabk),
    );
    let it = |r: &klab::harness::MethodResult| r.mean_iterations();
    let cpu = |r: &klab::harness::MethodResult| r.mean_seconds();
    let su3 = result.speedups.su3.unwrap_or(f64::NAN);
    let converged = mrk.all_converged() && mrbk.all_converged() && mrabk.all_converged();
    let checks = [
        ("MRK IT", within(it(mrk), 2307.0, 0.25)),
        ("MRBK IT", within(it(mrbk), 21.0, 0.40)),
        ("MRABK IT", within(it(mrabk), 38.0, 0.40)),
        ("CPU order", cpu(mrabk) < cpu(mrbk) && cpu(mrbk) < cpu(mrk)),
        ("SU3", su3 >= 1.5),
        ("converged", converged),
    ];
    let (in_time, time) = time_limit(start.elapsed(), 600);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome::new(
        failed.is_empty() && in_time,
        format!(
            "||A||^2 = {:.2}, t = {}, IT MRK/MRBK/MRABK = {:.1}/{:.1}/{:.1}, CPU = {:.4}/{:.4}/{:.4}s, SU3 = {su3:.2}, {time}{}",
            result.matrix.spectral_norm_sq,
            result.matrix.t,
            it(mrk),
            it(mrbk),
            it(mrabk),
            cpu(mrk),
            cpu(mrbk),
            cpu(mrabk),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join(", "))
            }
        ),
    )
}

fn trefethen_path() -> Result<(PathBuf, &'static str, Option<tempfile::TempDir>), String> {
    if let Ok(p) = std::env::var("KLAB_TREFETHEN_700") {
        return Ok((PathBuf::from(p), "file", None));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("Trefethen_700.mtx");
    write_matrix_market(&trefethen(700), &path).map_err(|e| e.to_string())?;
    Ok((path, "generated", Some(dir)))
}

fn criterion_7() -> Outcome {
    let (path, origin, _guard) = match trefethen_path() {
        Ok(p) => p,
        Err(e) => return Outcome::new(false, e),
    };
    let a = match read_matrix_market(&path) {
        Ok(a) => a,
        Err(e) => return Outcome::new(false, format!("{e}")),
    };
    let shape_ok = a.nrows() == 700 && a.ncols() == 700 && (a.density() - 0.0258).abs() < 5e-5;
    let mut spec = ExperimentSpec::new(
        MatrixSource::MatrixMarket(path.clone()),
        [MethodKind::Mrbk, MethodKind::Mrabk]
            .map(MethodSpec::new)
            .to_vec(),
    );
    spec.repetitions = 20;
    let result = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("experiment failed: {e}")),
    };
    let mrbk = result.method(MethodKind::Mrbk).unwrap();
    let mrabk = result.method(MethodKind::Mrabk).unwrap();
    let reached = |r: &klab::harness::MethodResult| {
        r.all_converged() && r.final_rse.iter().all(|&e| e < 1e-6)
    };

    // Two independent preparations must agree on the partition and on every selection.
    let reproducible = (|| -> Result<bool, Box<dyn std::error::Error>> {
        let p1 = klab::harness::prepare_experiment(&spec)?;
        let p2 = klab::harness::prepare_experiment(&spec)?;
        if p1.partition.permutation() != p2.partition.permutation() {
            return Ok(false);
        }
        for m in &spec.methods {
            let r1 = p1.solve_once(&spec, m, 3)?;
            let r2 = p2.solve_once(&spec, m, 3)?;
            let s1: Vec<usize> = r1.trace.iter().map(|e| e.selected).collect();
            let s2: Vec<usize> = r2.trace.iter().map(|e| e.selected).collect();
            let e1: Vec<u64> = r1.trace.iter().map(|e| e.rse.to_bits()).collect();
            let e2: Vec<u64> = r2.trace.iter().map(|e| e.rse.to_bits()).collect();
            if s1 != s2 || e1 != e2 {
                return Ok(false);
            }
        }
        Ok(true)
    })()
    .unwrap_or(false);

    let checks = [
        ("shape", shape_ok),
        ("MRBK IT", within(mrbk.mean_iterations(), 12.0, 0.5)),
        ("MRABK IT", within(mrabk.mean_iterations(), 40.0, 0.5)),
        ("MRBK RSE", reached(mrbk)),
        ("MRABK RSE", reached(mrabk)),
        ("reproducible", reproducible),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome::new(
        failed.is_empty(),
        format!(
            "{origin} matrix, ||A||^2 = {:.2}, t = {}, IT MRBK = {:.1} (target 12 +-50%), MRABK = {:.1} (target 40 +-50%){}",
            result.matrix.spectral_norm_sq,
            result.matrix.t,
            mrbk.mean_iterations(),
            mrabk.mean_iterations(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join(", "))
            }
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a27);
    let mut failures = Vec::new();
    for _ in 0..1000 {
        let m = rng.random_range(1..=2000usize);
        let t = rng.random_range(1..=m);
        let seed: u64 = rng.random();
        let p = Partition::randomized(m, t, seed).unwrap();
        let mut owner = vec![usize::MAX; m];
        let mut ok = p.t() == t && p.blocks().len() == t;
        for (i, block) in p.blocks().iter().enumerate() {
            let lo = i * m / t;
            let hi = (i + 1) * m / t;
            ok &= block.as_slice() == &p.permutation()[lo..hi];
            for &r in block {
                ok &= r < m && owner[r] == usize::MAX;
                if r < m {
                    owner[r] = i;
                }
            }
        }
        ok &= owner.iter().all(|&o| o != usize::MAX);
        ok &= Partition::randomized(m, t, seed).unwrap() == p;
        if !ok {
            failures.push(format!("m={m} t={t} seed={seed}"));
        }
    }
    let (in_time, time) = time_limit(start.elapsed(), 10);
    Outcome::new(
        failures.is_empty() && in_time,
        format!(
            "1000 triples, {} failing, {time}{}",
            failures.len(),
            first_failure(&failures)
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut worst_identity: f64 = 0.0;
    let mut order_ok = true;
    let mut cases = 0;
    let mut example = String::new();
    for (seed, (m, t)) in [(60, 2), (60, 3), (60, 4), (60, 5), (120, 6), (120, 8), (200, 10), (200, 40)]
        .into_iter()
        .enumerate()
    {
        let raw = generate_sparse_gaussian(m, 15, 0.5, seed as u64).unwrap();
        let a = normalize_rows(&raw).unwrap().matrix;
        if a.nrows() != m {
            continue;
        }
        let p = Partition::randomized(m, t, seed as u64).unwrap();
        let bounds = paving_bounds(&a, &p, DenseCap::DEFAULT).unwrap();
        let f = convergence_factors(&bounds, &p, 1.0);
        let lhs = 0.5 * f.zeta * (f.frobenius_sq / (f.frobenius_sq + f.zeta) + 1.0);
        let (mf, tf) = (m as f64, t as f64);
        let rhs = 0.5 * (mf / (tf - 1.0) + mf / tf);
        let rel = (lhs - rhs).abs() / rhs;
        if rel > worst_identity {
            worst_identity = rel;
            example = format!("m={m} t={t}: lhs {lhs:.6} rhs {rhs:.6}");
        }
        if t - 1 < m {
            order_ok &= f.rho_mrbk < f.rho_rbk;
        }
        cases += 1;
    }
    let identity_ok = worst_identity <= 1e-12;
    Outcome::new(
        identity_ok && order_ok && cases > 0,
        format!(
            "{cases} unit-row cases, worst relative gap in the equal-cardinality identity {worst_identity:.3e} (limit 1e-12, {example}), rho_MRBK < rho_RBK: {order_ok}"
        ),
    )
}

fn criterion_10(instances: &[Instance]) -> Outcome {
    let mut failures = Vec::new();
    let mut runs = 0;
    for inst in instances {
        let methods = [
            Method::mrbk(inst.partition.clone()),
            Method::mrabk(inst.partition.clone(), 1.0),
        ];
        for method in methods {
            let report = solve(&inst.sys, &method, &deep_stop(), 0).unwrap();
            runs += 1;
            let mut prev = report.initial_rse;
            for e in &report.trace {
                if e.rse > prev {
                    failures.push(format!(
                        "{} {}: step {} {:.3e} > {:.3e}",
                        inst.label, method.kind, e.iteration, e.rse, prev
                    ));
                    break;
                }
                prev = e.rse;
            }
            if report.termination != Termination::Converged {
                failures.push(format!("{} {}: {}", inst.label, method.kind, report.termination));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("{runs} traces{}", first_failure(&failures)),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let instances = contraction_instances();
    let criteria: [Criterion<'_>; 10] = [
        ("MRBK per-step contraction", Box::new(|| criterion_1(&instances))),
        ("MRABK per-step contraction", Box::new(|| criterion_2(&instances))),
        ("selected block residual annihilated", Box::new(|| criterion_3(&instances))),
        ("MRBK/RBK steps match dense pseudo-inverse", Box::new(criterion_4)),
        ("singleton blocks reduce to MRK", Box::new(criterion_5)),
        ("6000x1000 sparse Gaussian benchmark", Box::new(criterion_6)),
        ("Trefethen 700 benchmark", Box::new(criterion_7)),
        ("partition invariants", Box::new(criterion_8)),
        ("convergence-factor identity and ordering", Box::new(criterion_9)),
        ("monotone error traces", Box::new(|| criterion_10(&instances))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status}: {name} [{:.1}s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("{}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
