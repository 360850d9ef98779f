//! Benchmark commands: optimiser comparisons, per-operation scaling sweeps,
//! SVD method comparison and demo artefacts. Every command writes CSV files
//! into the configured output directory and returns their paths.
//!
//! Run-dependent wall times appear only in the `time_s`, `milliseconds`,
//! `efficiency` and `time_ms` columns; everything else is a pure function of
//! the configuration, seed and thread list.

pub mod config;

pub use config::{parse_threads, BenchConfig, MethodEntry, ProblemKind, KEYS};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::denoise::{self, DenoiseProblem, DenoiseStageTimes};
use crate::error::{Error, Result};
use crate::instances::{make_grid_laplacian, make_grid_signal, make_test_image, speckle_noise};
use crate::io::{fmt_f64, load_image_pgm, load_matrix_csv, save_image_pgm, save_points_csv, save_signal_csv};
use crate::linalg::{max_forward_residual, svd_cross, svd_lanczos, MatrixRef};
use crate::optim::{chain, minimize, ObjectiveProblem, RunReport};
use crate::parallel::available_threads;
use crate::rbf::{self, unflatten, ConstraintSet, RbfProblem, StageTimes};
use crate::types::DenseMatrix;

pub const REPORT_HEADER: &str = "method,functional_value,functional_count,time_s,converged";
pub const SCALING_HEADER: &str = "operation,threads,milliseconds,efficiency";
pub const SVD_HEADER: &str = "method,matrix,threads,time_ms,max_resid,converged";
pub const TRACE_HEADER: &str = "evaluation_index,best_f";

/// Operation names of the approximation pipeline, in column order.
pub const APPROX_OPERATIONS: [&str; 10] = [
    "knn_search",
    "matrix_def",
    "mat_transpose",
    "mat_mat_mult",
    "mat_vec_mult",
    "matrix_shift",
    "solve_system",
    "vec_vec_add",
    "vec_norm",
    "total",
];

/// Operation names of the denoising pipeline, in column order.
pub const DENOISE_OPERATIONS: [&str; 9] = [
    "svd",
    "mat_shift",
    "mat_transpose",
    "mat_mat_mult_sparse",
    "mat_mat_mult_dense",
    "mat_add",
    "mat_norm",
    "vec_norm",
    "total",
];

/// One line of `scaling.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub operation: String,
    pub threads: usize,
    pub milliseconds: f64,
    /// `T(1) / (p·T(p))`.
    pub efficiency: f64,
}

/// Caps a requested thread count at the host's parallelism.
pub fn cap_threads(requested: usize) -> (usize, Option<String>) {
    let host = available_threads();
    if requested > host {
        let msg = format!("requested {requested} threads, capped to {host} (host limit)");
        eprintln!("warning: {msg}");
        (host, Some(msg))
    } else {
        (requested, None)
    }
}

fn write_file(dir: &Path, name: &str, content: impl AsRef<[u8]>, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    files.push(path);
    Ok(())
}

fn trace_csv(r: &RunReport) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for (i, f) in &r.trace {
        let _ = writeln!(s, "{i},{}", fmt_f64(*f));
    }
    s
}

fn report_row(name: &str, r: &RunReport) -> String {
    format!(
        "{name},{},{},{:.6},{}\n",
        fmt_f64(r.best_f),
        r.functional_count,
        r.elapsed_seconds,
        r.converged
    )
}

fn skipped_row(name: &str, reason: &str) -> String {
    format!("{name},,,,\"unsupported: {}\"\n", reason.replace('"', "\"\""))
}

/// Runs one method entry; `Ok(None)` carries the reason it was skipped.
fn run_entry(entry: &MethodEntry, op: &ObjectiveProblem) -> Result<std::result::Result<RunReport, String>> {
    op.reset_counter();
    let res = match entry {
        MethodEntry::Single(s) => minimize(s, op),
        MethodEntry::Chain(a, b) => chain(a, b, op),
    };
    match res {
        Ok(r) => {
            debug_assert_eq!(r.functional_count, op.evaluations());
            Ok(Ok(r))
        }
        Err(Error::UnsupportedConstraints { reason, .. }) => Ok(Err(reason)),
        Err(e) => Err(e),
    }
}

fn ensure_dir(cfg: &BenchConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.clone())
}

/// Thread count used for optimisation runs: the largest requested, capped.
fn run_threads(cfg: &BenchConfig) -> usize {
    let want = cfg.threads.last().copied().unwrap_or(1);
    want.min(available_threads())
}

/// Builds the approximation instance described by `cfg`.
pub fn build_rbf(cfg: &BenchConfig, threads: usize) -> Result<RbfProblem> {
    let p = match cfg.problem {
        ProblemKind::ApproxGrid => {
            let signal = make_grid_signal(cfg.side, cfg.generator, cfg.seed)?;
            let b = ConstraintSet::bounds(vec![[0.0, 1.0]; 2 * cfg.n_centres]);
            RbfProblem::new(signal, cfg.n_centres, cfg.k, cfg.lambda, [[0.0, 1.0], [0.0, 1.0]])?.with_constraints(b)
        }
        ProblemKind::ApproxCurve => {
            let mut p = rbf::curve_problem(cfg.curve, cfg.m, cfg.n_centres, cfg.k, cfg.seed)?;
            p.lambda = cfg.lambda;
            if let Some(c) = p.constraints.as_mut() {
                c.tolerance = cfg.tolerance;
            }
            p
        }
        ProblemKind::Denoise => return Err(Error::Config("expected an approximation problem kind".into())),
    };
    Ok(p.with_threads(threads))
}

/// Input image (loaded or synthetic) and its speckled version.
pub fn denoise_inputs(cfg: &BenchConfig) -> Result<(DenseMatrix, DenseMatrix)> {
    let clean = match &cfg.image {
        Some(path) => load_image_pgm(path)?,
        None => make_test_image(cfg.image_side, cfg.seed)?,
    };
    let noised = speckle_noise(&clean, cfg.noise_variance, cfg.seed)?;
    Ok((clean, noised))
}

fn build_denoise(cfg: &BenchConfig, threads: usize) -> Result<DenoiseProblem> {
    if cfg.problem != ProblemKind::Denoise {
        return Err(Error::Config("expected problem kind denoise".into()));
    }
    let (_, noised) = denoise_inputs(cfg)?;
    DenoiseProblem::new(noised, cfg.nsv, cfg.alpha, threads)
}

/// Method comparison on an approximation instance.
pub fn cmd_approx(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let dir = ensure_dir(cfg)?;
    let problem = Arc::new(build_rbf(cfg, run_threads(cfg))?);
    let x0 = problem.initial_centres(cfg.seed);
    let op = rbf::objective_problem(problem.clone(), x0)?;
    let mut files = Vec::new();
    let mut report = format!("{REPORT_HEADER}\n");
    for entry in &cfg.methods {
        let name = entry.name();
        match run_entry(entry, &op)? {
            Ok(r) => {
                report.push_str(&report_row(&name, &r));
                write_file(&dir, &format!("trace_{name}.csv"), trace_csv(&r), &mut files)?;
                let centres = unflatten(&r.best_x);
                let path = dir.join(format!("centres_{name}.csv"));
                save_points_csv(&path, &centres)?;
                files.push(path);
                let eval = problem.evaluate(&r.best_x, None)?;
                let rec = rbf::reconstruct(&r.best_x, &eval.beta, &problem)?;
                let path = dir.join(format!("reconstruction_{name}.csv"));
                save_signal_csv(&path, &rec)?;
                files.push(path);
            }
            Err(reason) => report.push_str(&skipped_row(&name, &reason)),
        }
    }
    write_file(&dir, "approx_report.csv", report, &mut files)?;
    Ok(files)
}

/// Method comparison on the denoising instance, with the closed-form gap.
pub fn cmd_denoise(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let dir = ensure_dir(cfg)?;
    let problem = Arc::new(build_denoise(cfg, run_threads(cfg))?);
    let op = denoise::objective_problem(problem.clone(), cfg.analytic_gradient)?;
    let mu_star = denoise::denoise_closed_form(&problem);
    let mut files = Vec::new();
    let mut report = format!("{REPORT_HEADER}\n");
    let mut gaps = String::from("method,gap_inf\n");
    for entry in &cfg.methods {
        let name = entry.name();
        match run_entry(entry, &op)? {
            Ok(r) => {
                report.push_str(&report_row(&name, &r));
                let gap = r
                    .best_x
                    .iter()
                    .zip(&mu_star)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let _ = writeln!(gaps, "{name},{}", fmt_f64(gap));
                write_file(&dir, &format!("trace_{name}.csv"), trace_csv(&r), &mut files)?;
                if cfg.write_image {
                    let img = denoise::denoised_image(&r.best_x, &problem)?;
                    let path = dir.join(format!("denoised_{name}.pgm"));
                    save_image_pgm(&path, &img, 255, true)?;
                    files.push(path);
                }
            }
            Err(reason) => report.push_str(&skipped_row(&name, &reason)),
        }
    }
    write_file(&dir, "denoise_report.csv", report, &mut files)?;
    write_file(&dir, "closed_form_gap.csv", gaps, &mut files)?;
    Ok(files)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ms(d: Duration) -> f64 {
    // one nanosecond floor keeps efficiencies finite
    (d.as_secs_f64() * 1e3).max(1e-6)
}

/// Per-operation medians over `reps` timed runs after one warm-up.
fn time_operations(reps: usize, mut once: impl FnMut() -> Result<Vec<(&'static str, Duration)>>) -> Result<Vec<(&'static str, f64)>> {
    once()?;
    let mut samples: Vec<Vec<(&'static str, Duration)>> = Vec::with_capacity(reps);
    for _ in 0..reps {
        samples.push(once()?);
    }
    let names: Vec<&'static str> = samples[0].iter().map(|(n, _)| *n).collect();
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, n)| (*n, median(samples.iter().map(|s| ms(s[k].1)).collect())))
        .collect())
}

/// Per-operation timings for every requested thread count. A 1-thread
/// baseline is always measured so efficiencies are defined.
pub fn scaling_rows(cfg: &BenchConfig) -> Result<(Vec<ScalingRow>, Vec<String>)> {
    let mut threads = cfg.threads.clone();
    if threads.first() != Some(&1) {
        threads.insert(0, 1);
    }
    let mut notes = Vec::new();
    let mut timings: Vec<(usize, Vec<(&'static str, f64)>)> = Vec::new();
    for &p in &threads {
        let (eff, note) = cap_threads(p);
        notes.extend(note);
        let t = match cfg.problem {
            ProblemKind::Denoise => {
                let problem = build_denoise(cfg, eff)?;
                let mu = denoise::denoise_closed_form(&problem);
                time_operations(cfg.repetitions, || {
                    let mut st = DenoiseStageTimes::default();
                    problem.evaluate_with_svd(&mu, &mut st)?;
                    Ok(st.named())
                })?
            }
            _ => {
                let problem = build_rbf(cfg, eff)?;
                let mu = problem.initial_centres(cfg.seed);
                time_operations(cfg.repetitions, || {
                    let mut st = StageTimes::default();
                    problem.evaluate(&mu, Some(&mut st))?;
                    Ok(st.named())
                })?
            }
        };
        timings.push((p, t));
    }
    let base = timings[0].1.clone();
    let mut rows = Vec::new();
    for (k, (name, t1)) in base.iter().enumerate() {
        for (p, t) in &timings {
            let tp = t[k].1;
            rows.push(ScalingRow {
                operation: name.to_string(),
                threads: *p,
                milliseconds: tp,
                efficiency: t1 / (*p as f64 * tp),
            });
        }
    }
    Ok((rows, notes))
}

/// Writes `scaling.csv`.
pub fn cmd_scale(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let dir = ensure_dir(cfg)?;
    let (rows, notes) = scaling_rows(cfg)?;
    let kind = match cfg.problem {
        ProblemKind::ApproxGrid => "approx_grid",
        ProblemKind::ApproxCurve => "approx_curve",
        ProblemKind::Denoise => "denoise",
    };
    let mut s = format!("# problem={kind}\n# repetitions={} (median after 1 warm-up)\n", cfg.repetitions);
    for n in &notes {
        let _ = writeln!(s, "# note: {n}");
    }
    let _ = writeln!(s, "{SCALING_HEADER}");
    for r in &rows {
        let _ = writeln!(s, "{},{},{},{}", r.operation, r.threads, fmt_f64(r.milliseconds), fmt_f64(r.efficiency));
    }
    let mut files = Vec::new();
    write_file(&dir, "scaling.csv", s, &mut files)?;
    Ok(files)
}

/// Cross-product and Lanczos SVD on a dense and a sparse instance.
pub fn cmd_svdcmp(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let dir = ensure_dir(cfg)?;
    let dense = match &cfg.svd_dense {
        Some(p) => load_matrix_csv(p)?,
        None => make_test_image(cfg.svd_dense_side, cfg.seed)?,
    };
    let sparse = make_grid_laplacian(cfg.laplacian_side)?;
    let tol = cfg.svd_tol;
    let mut s = format!("# tolerance={}\n# nsv={}\n", fmt_f64(tol), cfg.svd_nsv);
    let mut lines = Vec::new();
    for &p in &cfg.threads {
        let (eff, note) = cap_threads(p);
        if let Some(n) = note {
            let _ = writeln!(s, "# note: {n}");
        }
        for method in ["cross", "lanczos"] {
            for (label, a) in [("dense", MatrixRef::from(&dense)), ("sparse", MatrixRef::from(&sparse))] {
                let nsv = cfg.svd_nsv.min(a.rows().min(a.cols()));
                let run = || match method {
                    "cross" => svd_cross(a, nsv, tol, eff),
                    _ => svd_lanczos(a, nsv, tol, eff),
                };
                let _ = run();
                let mut times = Vec::with_capacity(cfg.repetitions);
                let mut last = None;
                for _ in 0..cfg.repetitions {
                    let t = Instant::now();
                    let r = run();
                    times.push(t.elapsed().as_secs_f64() * 1e3);
                    last = Some(r);
                }
                let time = median(times);
                let line = match last.expect("at least one repetition") {
                    Ok(f) => format!(
                        "{method},{label},{p},{time:.6},{},true",
                        fmt_f64(max_forward_residual(a, &f))
                    ),
                    Err(Error::SvdNotConverged { .. }) => format!("{method},{label},{p},{time:.6},,false"),
                    Err(e) => return Err(e),
                };
                lines.push(line);
            }
        }
    }
    let _ = writeln!(s, "{SVD_HEADER}");
    for l in lines {
        let _ = writeln!(s, "{l}");
    }
    let mut files = Vec::new();
    write_file(&dir, "svd_compare.csv", s, &mut files)?;
    Ok(files)
}

/// Input/variables/output artefacts for one configuration.
pub fn cmd_demo(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let dir = ensure_dir(cfg)?;
    let mut files = Vec::new();
    match cfg.problem {
        ProblemKind::Denoise => {
            let (clean, noised) = denoise_inputs(cfg)?;
            let problem = DenoiseProblem::new(noised.clone(), cfg.nsv, cfg.alpha, run_threads(cfg))?;
            let out = denoise::denoised_image(&denoise::denoise_closed_form(&problem), &problem)?;
            for (name, img) in [("demo_input.pgm", &clean), ("demo_noised.pgm", &noised), ("demo_denoised.pgm", &out)] {
                let path = dir.join(name);
                save_image_pgm(&path, img, 255, true)?;
                files.push(path);
            }
        }
        _ => {
            let problem = Arc::new(build_rbf(cfg, run_threads(cfg))?);
            let op = rbf::objective_problem(problem.clone(), problem.initial_centres(cfg.seed))?;
            let mut best = None;
            for entry in &cfg.methods {
                if let Ok(r) = run_entry(entry, &op)? {
                    best = Some(r);
                    break;
                }
            }
            let r = best.ok_or_else(|| Error::Config("no configured method supports this problem".into()))?;
            let eval = problem.evaluate(&r.best_x, None)?;
            let rec = rbf::reconstruct(&r.best_x, &eval.beta, &problem)?;
            let p = dir.join("demo_input.csv");
            save_signal_csv(&p, &problem.signal)?;
            files.push(p);
            let p = dir.join("demo_centres.csv");
            save_points_csv(&p, &unflatten(&r.best_x))?;
            files.push(p);
            let p = dir.join("demo_reconstruction.csv");
            save_signal_csv(&p, &rec)?;
            files.push(p);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn skipped_row_shape() {
        assert_eq!(skipped_row("praxis", "nonlinear constraints"), "praxis,,,,\"unsupported: nonlinear constraints\"\n");
    }
}
