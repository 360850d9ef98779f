//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line with the measured values and pinned tolerances.
//! Tests take a shared lock so wall-time limits are not skewed by each other.
//! Lines go straight to stdout so they show even when output is captured.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigmin::bench::{scaling_rows, BenchConfig, ProblemKind};
use sigmin::denoise::{denoise_gradient, denoise_objective, objective_problem as denoise_op, threshold_bounds, DenoiseProblem};
use sigmin::instances::{grid_points, make_test_image, speckle_noise, CurveKind};
use sigmin::linalg::{
    bicgstab_solve, jacobi_preconditioner, matrix_shift, sparse_matmat, sparse_transpose, svd_cross, svd_lanczos,
    SvdFactors,
};
use sigmin::neighbors::KdTree;
use sigmin::optim::{chain, minimize, Method, ObjectiveProblem, OptimiserSpec};
use sigmin::rbf::{approx_objective, curve_problem, grid_problem, objective_problem, signed_curve_distance, ConstraintKind, RbfProblem};
use sigmin::{DenseMatrix, DomainKind, Error, Point2, Signal, SparseMatrixCSR};

static SERIAL: Mutex<()> = Mutex::new(());

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn verdict(n: u32, pass: bool, detail: String, start: Instant, limit_s: f64) {
    let t = start.elapsed().as_secs_f64();
    let ok = pass && t <= limit_s;
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {n:>2}: {}  {detail}; runtime {t:.1}s (limit {limit_s}s)",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(t <= limit_s, "criterion {n} exceeded its runtime limit: {t:.1}s");
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// 64×64 speckled synthetic image, 16 triples, α = min S so α/2 < S_i − δ.
fn denoise_instance() -> Arc<DenoiseProblem> {
    let clean = make_test_image(64, 11).unwrap();
    let noised = speckle_noise(&clean, 0.05, 11).unwrap();
    let probe = DenoiseProblem::new(noised.clone(), 16, 0.1, 1).unwrap();
    let alpha = probe.svd.s.iter().copied().fold(f64::INFINITY, f64::min);
    let p = DenoiseProblem::from_factors(noised, probe.svd.clone(), alpha, 1).unwrap();
    assert!(threshold_bounds(&p).iter().all(|b| alpha / 2.0 < b[1]));
    Arc::new(p)
}

fn random_feasible(bounds: &[[f64; 2]], r: &mut ChaCha8Rng) -> Vec<f64> {
    bounds.iter().map(|b| r.random_range(b[0]..=b[1])).collect()
}

#[test]
fn criterion_01_denoise_lbfgs_reaches_closed_form() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = denoise_instance();
    // interior optimum of Σμ² − αΣμ + const
    let mu_star = vec![p.alpha / 2.0; p.rank()];
    let eps_star = denoise_objective(&mu_star, &p).unwrap();
    let op = denoise_op(p.clone(), true).unwrap();
    let r = minimize(&OptimiserSpec::new(Method::Lbfgs, 2000), &op).unwrap();
    let gap = inf_norm_diff(&r.best_x, &mu_star);
    let excess = r.best_f - eps_star;
    let pass = gap <= 1e-6 && excess <= 1e-10 && r.functional_count <= 50;
    verdict(
        1,
        pass,
        format!(
            "gap_inf={gap:.3e} (<=1e-6), best_f-eps*={excess:.3e} (<=1e-10), count={} (<=50)",
            r.functional_count
        ),
        start,
        10.0,
    );
}

#[test]
fn criterion_02_gradient_matches_central_differences() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = denoise_instance();
    let bounds = threshold_bounds(&p);
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mu = random_feasible(&bounds, &mut r);
        let g = denoise_gradient(&mu, &p).unwrap();
        let fd: Vec<f64> = (0..mu.len())
            .map(|i| {
                let h = 1e-4 * bounds[i][1].max(1.0);
                let mut a = mu.clone();
                let mut b = mu.clone();
                a[i] += h;
                b[i] -= h;
                (denoise_objective(&a, &p).unwrap() - denoise_objective(&b, &p).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
        worst = worst.max(norm(&diff) / norm(&g));
    }
    verdict(2, worst <= 1e-5, format!("max relative FD error {worst:.3e} (<=1e-5) over 10 points"), start, 5.0);
}

#[test]
fn criterion_03_convexity_and_optimality() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = denoise_instance();
    let bounds = threshold_bounds(&p);
    let eps_star = denoise_objective(&vec![p.alpha / 2.0; p.rank()], &p).unwrap();
    let mut r = rng(3);
    let mut below = 0;
    for _ in 0..1000 {
        let mu = random_feasible(&bounds, &mut r);
        if denoise_objective(&mu, &p).unwrap() < eps_star {
            below += 1;
        }
    }
    let mut jensen = f64::NEG_INFINITY;
    for _ in 0..100 {
        let a = random_feasible(&bounds, &mut r);
        let b = random_feasible(&bounds, &mut r);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let lhs = denoise_objective(&mid, &p).unwrap();
        let rhs = 0.5 * (denoise_objective(&a, &p).unwrap() + denoise_objective(&b, &p).unwrap());
        jensen = jensen.max((lhs - rhs) / rhs.abs().max(1.0));
    }
    verdict(
        3,
        below == 0 && jensen <= 1e-8,
        format!("{below} of 1000 points below eps(mu*) (0 allowed), max Jensen excess {jensen:.3e} (<=1e-8 relative)"),
        start,
        10.0,
    );
}

/// `GᵀG + I` for a random sparse 400×200 `G` with 10 entries per row.
fn gram_like(seed: u64) -> SparseMatrixCSR {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..400 {
        for _ in 0..10 {
            t.push((i, r.random_range(0..200), r.random_range(-1.0..1.0)));
        }
    }
    let g = SparseMatrixCSR::from_triplets(400, 200, &t).unwrap();
    matrix_shift(&sparse_matmat(&sparse_transpose(&g), &g, 1).unwrap(), 1.0).unwrap()
}

#[test]
fn criterion_04_bicgstab_matches_dense_solve() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (mut worst_err, mut worst_res) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let a = gram_like(100 + seed);
        let mut r = rng(200 + seed);
        let b: Vec<f64> = (0..200).map(|_| r.random_range(-1.0..1.0)).collect();
        let (x, _) = bicgstab_solve(&a, &b, &jacobi_preconditioner(&a).unwrap(), 1e-8, 2000, 1).unwrap();
        let dense = a.to_dense();
        let m = DMatrix::from_row_slice(200, 200, dense.data());
        let exact = m.clone().cholesky().expect("SPD").solve(&nalgebra::DVector::from_column_slice(&b));
        let diff: Vec<f64> = x.iter().zip(exact.iter()).map(|(p, q)| p - q).collect();
        worst_err = worst_err.max(norm(&diff) / exact.norm());
        let ax = &m * nalgebra::DVector::from_column_slice(&x);
        let res: Vec<f64> = b.iter().zip(ax.iter()).map(|(p, q)| p - q).collect();
        worst_res = worst_res.max(norm(&res) / norm(&b));
    }
    verdict(
        4,
        worst_err <= 1e-6 && worst_res <= 1e-8,
        format!("max relative error {worst_err:.3e} (<=1e-6), max residual/|b| {worst_res:.3e} (<=1e-8) over 20 systems"),
        start,
        20.0,
    );
}

fn orth_err(m: &DenseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.cols() {
        for j in 0..m.cols() {
            let d: f64 = (0..m.rows()).map(|k| m.get(k, i) * m.get(k, j)).sum();
            worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Largest `‖Av − su‖` or `‖Aᵀu − sv‖` over the triples.
fn triple_residual(a: &DenseMatrix, f: &SvdFactors) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..f.s.len() {
        let (u, v) = (f.u.column(t), f.v.column(t));
        let av: Vec<f64> = (0..a.rows())
            .map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() - f.s[t] * u[i])
            .collect();
        let atu: Vec<f64> = (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| a.get(i, j) * u[i]).sum::<f64>() - f.s[t] * v[j])
            .collect();
        worst = worst.max(norm(&av)).max(norm(&atu));
    }
    worst
}

#[test]
fn criterion_05_svd_contracts() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut r = rng(5);
    let (mut orth, mut resid, mut agree, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let rows = r.random_range(10..=100);
        let cols = r.random_range(10..=100);
        let nsv = r.random_range(1..=rows.min(cols).min(40));
        let a = DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let c = svd_cross(&a, nsv, 1e-6, 1).unwrap();
        let l = svd_lanczos(&a, nsv, 1e-6, 1).unwrap();
        let s1 = c.s[0];
        for f in [&c, &l] {
            orth = orth.max(orth_err(&f.u)).max(orth_err(&f.v));
            resid = resid.max(triple_residual(&a, f) / s1);
        }
        let mut exact: Vec<f64> = DMatrix::from_row_slice(rows, cols, a.data()).singular_values().iter().copied().collect();
        exact.sort_by(|x, y| y.total_cmp(x));
        for i in 0..nsv {
            agree = agree.max((c.s[i] - l.s[i]).abs() / l.s[i]);
            oracle = oracle.max((l.s[i] - exact[i]).abs() / exact[i]);
        }
    }
    verdict(
        5,
        orth <= 1e-8 && resid <= 1e-6 && agree <= 1e-6 && oracle <= 1e-6,
        format!(
            "orthonormality {orth:.3e} (<=1e-8), residual/s1 {resid:.3e} (<=1e-6), cross vs lanczos {agree:.3e} (<=1e-6), vs dense oracle {oracle:.3e} (<=1e-6)"
        ),
        start,
        30.0,
    );
}

#[test]
fn criterion_06_knn_matches_brute_force() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut r = rng(6);
    let pts: Vec<Point2> = (0..1000).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect();
    let queries: Vec<Point2> = (0..100).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect();
    let tree = KdTree::build(&pts).unwrap();
    let mut mismatches = 0;
    for k in [1, 16, pts.len()] {
        let got = tree.knn_batch(&queries, k, 1).unwrap();
        for (q, row) in queries.iter().zip(&got) {
            let mut brute: Vec<(usize, f64)> =
                pts.iter().enumerate().map(|(i, p)| (i, ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            brute.truncate(k);
            let same = row.len() == k
                && row.iter().zip(&brute).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-15);
            if !same {
                mismatches += 1;
            }
        }
    }
    verdict(
        6,
        mismatches == 0,
        format!("{mismatches} of 300 query lists differ from brute force (k = 1, 16, 1000)"),
        start,
        5.0,
    );
}

#[test]
fn criterion_07_constructed_exact_instance() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let side = 32;
    let mu0: Vec<f64> = vec![0.2, 0.25, 0.8, 0.3, 0.3, 0.75, 0.7, 0.8];
    let beta0 = [1.5, -0.7, 0.9, 2.0];
    let pts = grid_points(side);
    // f = Φ(μ₀)β₀ with every centre in every row, φ(s) = exp(−s)
    let f: Vec<f64> = pts
        .iter()
        .map(|q| {
            (0..4)
                .map(|i| beta0[i] * (-((q[0] - mu0[2 * i]).powi(2) + (q[1] - mu0[2 * i + 1]).powi(2)).sqrt()).exp())
                .sum()
        })
        .collect();
    let fnorm = norm(&f);
    let signal = Signal::new(pts, f, DomainKind::Grid { side }).unwrap();
    let p = RbfProblem::new(signal, 4, 4, 1e-12, [[0.0, 1.0], [0.0, 1.0]]).unwrap();
    let e0 = approx_objective(&mu0, &p);
    let mut r = rng(7);
    let mut not_larger = 0;
    let mut smallest_gain = f64::INFINITY;
    for _ in 0..20 {
        let mu: Vec<f64> = mu0.iter().map(|v| (v + r.random_range(-0.05..0.05)).clamp(0.0, 1.0)).collect();
        let e = approx_objective(&mu, &p);
        smallest_gain = smallest_gain.min(e - e0);
        if e <= e0 {
            not_larger += 1;
        }
    }
    verdict(
        7,
        e0 <= 1e-6 * fnorm && not_larger == 0,
        format!(
            "eps(mu0)={e0:.3e} (<= 1e-6*|f| = {:.3e}), {not_larger} of 20 perturbations not larger, smallest increase {smallest_gain:.3e}",
            1e-6 * fnorm
        ),
        start,
        30.0,
    );
}

fn median3(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_08_praxis_beats_lbfgs_on_grid() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (mut px, mut lb, mut lost) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..3u64 {
        let p = Arc::new(grid_problem(64, 128, 32, seed).unwrap());
        let x0 = p.initial_centres(seed);
        let mut best = [0.0; 2];
        for (slot, m) in [Method::Praxis, Method::Lbfgs].into_iter().enumerate() {
            let op = objective_problem(p.clone(), x0.clone()).unwrap();
            best[slot] = minimize(&OptimiserSpec::new(m, 2000).with_seed(seed), &op).unwrap().best_f;
        }
        if best[0] > best[1] {
            lost.push(seed);
            let _ = writeln!(
                std::io::stdout().lock(),
                "criterion  8: seed {seed} soft failure, praxis {} > lbfgs {}",
                best[0],
                best[1]
            );
        }
        px.push(best[0]);
        lb.push(best[1]);
    }
    let (mp, ml) = (median3(px.clone()), median3(lb.clone()));
    verdict(
        8,
        mp <= ml && lost.len() <= 1,
        format!("median praxis {mp:.6} <= median lbfgs {ml:.6}; per seed praxis {px:?} lbfgs {lb:?}; seeds lost {lost:?} (<=1)"),
        start,
        600.0,
    );
}

#[test]
fn criterion_09_curve_constraints() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = Arc::new(curve_problem(CurveKind::Circle, 256, 8, 8, 9).unwrap());
    let curve = match &p.constraints.as_ref().unwrap().kind {
        ConstraintKind::CurveEquality(c) => c.clone(),
        _ => unreachable!("circle instance carries a curve constraint"),
    };
    let x0 = p.initial_centres(9);
    let mut detail = Vec::new();
    let mut pass = true;
    for m in [Method::Isres, Method::Cobyla] {
        let op = objective_problem(p.clone(), x0.clone()).unwrap();
        let r = minimize(&OptimiserSpec::new(m, 3000).with_seed(9), &op).unwrap();
        let worst = signed_curve_distance(&curve, &r.best_x).iter().fold(0.0f64, |a, d| a.max(d.abs()));
        pass &= worst <= 1e-6 && r.feasible;
        detail.push(format!("{m} max residual {worst:.3e} (<=1e-6) f={:.4}", r.best_f));
    }
    for m in [Method::Praxis, Method::DirectL, Method::Lbfgs] {
        p.reset_counters();
        let op = objective_problem(p.clone(), x0.clone()).unwrap();
        let rejected = matches!(minimize(&OptimiserSpec::new(m, 100), &op), Err(Error::UnsupportedConstraints { .. }));
        let untouched = op.evaluations() == 0 && p.evaluations() == 0;
        pass &= rejected && untouched;
        detail.push(format!("{m} rejected={rejected} evaluations=0:{untouched}"));
    }
    verdict(9, pass, detail.join(", "), start, 300.0);
}

fn multimodal() -> ObjectiveProblem {
    ObjectiveProblem::new(1, |x| x[0].sin() + (10.0 * x[0] / 3.0).sin())
        .unwrap()
        .with_bounds(vec![[2.7, 7.5]])
        .unwrap()
}

#[test]
fn criterion_10_direct_l_global_search() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = |x: f64| x.sin() + (10.0 * x / 3.0).sin();
    let n = 1_000_000;
    let x_star = (0..=n)
        .map(|i| 2.7 + 4.8 * i as f64 / n as f64)
        .min_by(|a, b| g(*a).total_cmp(&g(*b)))
        .unwrap();
    let r = minimize(&OptimiserSpec::new(Method::DirectL, 5000), &multimodal()).unwrap();
    let err = (r.best_x[0] - x_star).abs();
    let mut worse = Vec::new();
    for budget in [5, 10, 20, 50, 100, 200, 500, 5000] {
        let d_spec = OptimiserSpec::new(Method::DirectL, budget);
        let alone = minimize(&d_spec, &multimodal()).unwrap();
        let chained = chain(&d_spec, &OptimiserSpec::new(Method::Praxis, 200), &multimodal()).unwrap();
        if chained.best_f > alone.best_f {
            worse.push(budget);
        }
    }
    verdict(
        10,
        err <= 1e-2 && r.functional_count <= 5000 && worse.is_empty(),
        format!(
            "scan minimiser {x_star:.6}, direct_l {:.6} (|err|={err:.2e} <=1e-2) in {} evals (<=5000); chain worse at budgets {worse:?} (none allowed)",
            r.best_x[0], r.functional_count
        ),
        start,
        60.0,
    );
}

#[test]
fn criterion_11_scaling_sanity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = BenchConfig {
        problem: ProblemKind::ApproxGrid,
        side: 256,
        threads: vec![1, 4],
        repetitions: 5,
        ..BenchConfig::default()
    };
    let (rows, notes) = scaling_rows(&cfg).unwrap();
    let total = |p: usize| rows.iter().find(|r| r.operation == "total" && r.threads == p).unwrap().milliseconds;
    let (t1, t4) = (total(1), total(4));
    let mut worst = 0.0f64;
    for r in &rows {
        let base = rows.iter().find(|b| b.operation == r.operation && b.threads == 1).unwrap().milliseconds;
        let expect = base / (r.threads as f64 * r.milliseconds);
        worst = worst.max((r.efficiency - expect).abs());
    }
    verdict(
        11,
        t4 <= 1.1 * t1 && worst <= 1e-9,
        format!("total T(4)={t4:.2}ms <= 1.1*T(1)={:.2}ms, efficiency inconsistency {worst:.1e} (<=1e-9); notes {notes:?}", 1.1 * t1),
        start,
        300.0,
    );
}

/// Columns holding wall-clock measurements; their values are blanked
/// before comparing reruns.
const TIMING_COLUMNS: [&str; 4] = ["time_s", "milliseconds", "efficiency", "time_ms"];

fn masked(text: &str) -> String {
    let mut out = String::new();
    let mut mask: Vec<bool> = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else if mask.is_empty() {
            mask = line.split(',').map(|c| TIMING_COLUMNS.contains(&c)).collect();
            out.push_str(line);
        } else {
            let cells: Vec<&str> = line.split(',').enumerate().map(|(i, c)| if mask.get(i) == Some(&true) { "*" } else { c }).collect();
            out.push_str(&cells.join(","));
        }
        out.push('\n');
    }
    out
}

fn run_cli(cmd: &str, config: &Path, out: &Path) -> BTreeMap<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_sigmin"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{cmd}: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), masked(&std::fs::read_to_string(&p).unwrap())))
        .collect()
}

#[test]
fn criterion_12_cli_reruns_are_identical() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let approx = "seed = 4\n[problem]\nkind = approx_grid\nside = 24\nn_centres = 12\nk = 6\n[methods]\nlist = praxis, lbfgs, cobyla, isres, direct_l+praxis\nbudget = 150\n";
    let curve = "seed = 4\n[problem]\nkind = approx_curve\nm = 64\nn_centres = 4\nk = 4\n[methods]\nlist = cobyla, praxis\nbudget = 100\n";
    let denoise = "seed = 4\n[problem]\nkind = denoise\nimage_side = 32\nnsv = 8\n[methods]\nlist = lbfgs, praxis, direct_l\nbudget = 200\n[scale]\nrepetitions = 2\n[svd]\nnsv = 6\ndense_side = 30\nlaplacian_side = 8\n";
    let cases = [
        ("approx", approx),
        ("approx", curve),
        ("denoise", denoise),
        ("scale", approx),
        ("scale", denoise),
        ("svdcmp", denoise),
        ("demo", approx),
        ("demo", denoise),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("case{i}.cfg"));
        std::fs::write(&cfg, text).unwrap();
        let a = run_cli(cmd, &cfg, &dir.path().join(format!("a{i}")));
        let b = run_cli(cmd, &cfg, &dir.path().join(format!("b{i}")));
        files += a.len();
        if a != b {
            differing.push(format!("{cmd}#{i}"));
        }
    }
    verdict(
        12,
        differing.is_empty() && files > 0,
        format!("{files} CSVs across {} runs, differing {differing:?} (timing columns masked)", cases.len()),
        start,
        300.0,
    );
}
