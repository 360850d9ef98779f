//! Least-squares RBF approximation with movable centres.
//!
//! For centres `μ` the objective rebuilds the k-nn sparsified Gram matrix
//! `Φ(μ)`, solves `(ΦᵀΦ + λI)β = Φᵀf` with Jacobi-preconditioned BICGSTAB,
//! and returns `‖f − Φβ‖₂`.

mod curve;

pub use curve::{curve_distance_constraint, fit_interpolating_curve, signed_curve_distance, Curve};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{arg_err, Result};
use crate::instances::{rng, CurveKind, SineMix};
use crate::linalg::{
    bicgstab_solve, jacobi_preconditioner, matrix_shift, sparse_matmat, sparse_matvec, sparse_transpose,
    SolveStats,
};
use crate::neighbors::KdTree;
use crate::optim::ObjectiveProblem;
use crate::parallel;
use crate::types::{CurvePoints, DomainKind, Point2, Signal, SparseMatrixCSR};

pub const DEFAULT_LAMBDA: f64 = 1e-12;
pub const DEFAULT_CONSTRAINT_TOL: f64 = 1e-6;
const SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `φ(s) = exp(−s)`.
    #[default]
    Exp,
}

impl Kernel {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Kernel::Exp => (-s).exp(),
        }
    }
}

/// What a constraint set restricts the centres to.
#[derive(Debug, Clone)]
pub enum ConstraintKind {
    Bounds(Vec<[f64; 2]>),
    CurveEquality(Arc<Curve>),
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    /// Equality satisfaction threshold.
    pub tolerance: f64,
}

impl ConstraintSet {
    pub fn bounds(bounds: Vec<[f64; 2]>) -> Self {
        Self {
            kind: ConstraintKind::Bounds(bounds),
            tolerance: DEFAULT_CONSTRAINT_TOL,
        }
    }

    pub fn curve(curve: Curve, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return arg_err("constraint tolerance must be positive");
        }
        Ok(Self {
            kind: ConstraintKind::CurveEquality(Arc::new(curve)),
            tolerance,
        })
    }
}

/// Wall time spent in each stage of the objective pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    pub knn_search: Duration,
    pub matrix_def: Duration,
    pub mat_transpose: Duration,
    pub mat_mat_mult: Duration,
    pub mat_vec_mult: Duration,
    pub matrix_shift: Duration,
    pub solve_system: Duration,
    pub vec_vec_add: Duration,
    pub vec_norm: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.knn_search
            + self.matrix_def
            + self.mat_transpose
            + self.mat_mat_mult
            + self.mat_vec_mult
            + self.matrix_shift
            + self.solve_system
            + self.vec_vec_add
            + self.vec_norm
    }

    /// `(name, duration)` pairs in pipeline order, `total` last.
    pub fn named(&self) -> Vec<(&'static str, Duration)> {
        vec![
            ("knn_search", self.knn_search),
            ("matrix_def", self.matrix_def),
            ("mat_transpose", self.mat_transpose),
            ("mat_mat_mult", self.mat_mat_mult),
            ("mat_vec_mult", self.mat_vec_mult),
            ("matrix_shift", self.matrix_shift),
            ("solve_system", self.solve_system),
            ("vec_vec_add", self.vec_vec_add),
            ("vec_norm", self.vec_norm),
            ("total", self.total()),
        ]
    }
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *slot += t.elapsed();
    out
}

/// The approximation problem for one sampled signal.
#[derive(Debug)]
pub struct RbfProblem {
    pub signal: Signal,
    pub n_centres: usize,
    pub kernel: Kernel,
    pub k: usize,
    pub lambda: f64,
    /// Per-coordinate `[lo, hi]` of the domain.
    pub bounds: [[f64; 2]; 2],
    pub constraints: Option<ConstraintSet>,
    pub threads: usize,
    evaluations: AtomicUsize,
    failures: AtomicUsize,
}

impl RbfProblem {
    pub fn new(signal: Signal, n_centres: usize, k: usize, lambda: f64, bounds: [[f64; 2]; 2]) -> Result<Self> {
        if n_centres == 0 || n_centres > signal.len() {
            return arg_err(format!("need 1 <= n <= m, got n = {n_centres}, m = {}", signal.len()));
        }
        if k == 0 || k > n_centres {
            return arg_err(format!("k = {k} outside 1..={n_centres}"));
        }
        if !(lambda > 0.0) {
            return arg_err("lambda must be positive");
        }
        if bounds.iter().any(|b| !(b[0] < b[1])) {
            return arg_err("bounds need lo < hi");
        }
        Ok(Self {
            signal,
            n_centres,
            kernel: Kernel::Exp,
            k,
            lambda,
            bounds,
            constraints: None,
            threads: 1,
            evaluations: AtomicUsize::new(0),
            failures: AtomicUsize::new(0),
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_constraints(mut self, c: ConstraintSet) -> Self {
        self.constraints = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n_centres
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Number of evaluations whose linear solve failed.
    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
        self.failures.store(0, Ordering::Relaxed);
    }

    /// Box bounds for the flat variable vector `(x₀, y₀, x₁, y₁, …)`.
    pub fn variable_bounds(&self) -> Vec<[f64; 2]> {
        (0..self.dim()).map(|i| self.bounds[i % 2]).collect()
    }

    /// Seeded uniform centres inside the domain box.
    pub fn random_centres(&self, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..self.dim())
            .map(|i| {
                let b = self.bounds[i % 2];
                r.random_range(b[0]..b[1])
            })
            .collect()
    }

    /// Seeded feasible starting centres: uniform in the box, or evenly
    /// spaced polyline vertices when the centres are tied to a curve.
    pub fn initial_centres(&self, seed: u64) -> Vec<f64> {
        match self.constraints.as_ref().map(|c| &c.kind) {
            Some(ConstraintKind::CurveEquality(curve)) => {
                let poly = curve.polyline();
                let offset = rng(seed).random_range(0..poly.len());
                (0..self.n_centres)
                    .flat_map(|i| {
                        let p = poly[(offset + i * poly.len() / self.n_centres) % poly.len()];
                        [p[0], p[1]]
                    })
                    .collect()
            }
            _ => self.random_centres(seed),
        }
    }

    /// Runs the whole pipeline without touching the counters.
    pub fn evaluate(&self, mu: &[f64], times: Option<&mut StageTimes>) -> Result<Evaluation> {
        if mu.len() != self.dim() {
            return arg_err(format!("expected {} variables, got {}", self.dim(), mu.len()));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return arg_err("centres must be finite");
        }
        let mut local = StageTimes::default();
        let t = match times {
            Some(t) => t,
            None => &mut local,
        };
        let th = self.threads;
        let f = self.signal.values();
        let centres = unflatten(mu);

        let neighbours = timed(&mut t.knn_search, || {
            KdTree::build(&centres)?.knn_batch_flat(self.signal.points(), self.k, th)
        })?;
        let m = self.signal.len();
        let phi = timed(&mut t.matrix_def, || gram_from_neighbours(neighbours, m, self.n_centres, self.kernel, th))?;
        let phit = timed(&mut t.mat_transpose, || sparse_transpose(&phi));
        let normal = timed(&mut t.mat_mat_mult, || sparse_matmat(&phit, &phi, th))?;
        let rhs = timed(&mut t.mat_vec_mult, || sparse_matvec(&phit, f, th))?;
        let shifted = timed(&mut t.matrix_shift, || matrix_shift(&normal, self.lambda))?;
        let maxit = 10 * self.signal.len();
        let (beta, stats) = timed(&mut t.solve_system, || {
            let p = jacobi_preconditioner(&shifted)?;
            bicgstab_solve(&shifted, &rhs, &p, SOLVER_TOL, maxit, th)
        })?;
        let fhat = timed(&mut t.mat_vec_mult, || sparse_matvec(&phi, &beta, th))?;
        let mut diff = fhat.clone();
        timed(&mut t.vec_vec_add, || parallel::par_update(th, &mut diff, |i, v| f[i] - v));
        let eps = timed(&mut t.vec_norm, || parallel::norm2(th, &diff));
        Ok(Evaluation {
            eps,
            beta,
            fhat,
            stats,
        })
    }
}

/// Result of one pipeline run.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub eps: f64,
    pub beta: Vec<f64>,
    pub fhat: Vec<f64>,
    pub stats: SolveStats,
}

/// `(x₀, y₀, x₁, y₁, …)` as points.
pub fn unflatten(mu: &[f64]) -> Vec<Point2> {
    mu.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// CSR matrix from row-major `(column, distance)` lists of equal length `k`.
fn gram_from_neighbours(
    neighbours: Vec<(usize, f64)>,
    rows: usize,
    n: usize,
    kernel: Kernel,
    threads: usize,
) -> Result<SparseMatrixCSR> {
    let k = neighbours.len() / rows.max(1);
    let mut entries = neighbours;
    parallel::par_rows(threads, &mut entries, k, |_, row| {
        row.sort_unstable_by_key(|e| e.0);
        row.iter_mut().for_each(|e| e.1 = kernel.eval(e.1));
    });
    let offsets = (0..=rows).map(|i| i * k).collect();
    let (cols, vals) = entries.into_iter().unzip();
    Ok(SparseMatrixCSR::from_raw_unchecked(rows, n, offsets, cols, vals))
}

/// `m × n` Gram matrix: row `i` holds `φ(‖q_i − μ_j‖)` for the `k` centres
/// nearest to `q_i`.
pub fn assemble_gram(
    points: &[Point2],
    centres: &[Point2],
    kernel: Kernel,
    k: usize,
    threads: usize,
) -> Result<SparseMatrixCSR> {
    if k == 0 || k > centres.len() {
        return arg_err(format!("k = {k} outside 1..={}", centres.len()));
    }
    let tree = KdTree::build(centres)?;
    let nb = tree.knn_batch_flat(points, k, threads)?;
    gram_from_neighbours(nb, points.len(), centres.len(), kernel, threads)
}

/// Solves `(ΦᵀΦ + λI)β = Φᵀf` by Jacobi-preconditioned BICGSTAB.
pub fn solve_coefficients(
    phi: &SparseMatrixCSR,
    f: &[f64],
    lambda: f64,
    tol: f64,
    maxit: usize,
    threads: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    if f.len() != phi.rows() {
        return arg_err(format!("signal has {} values, Gram has {} rows", f.len(), phi.rows()));
    }
    if !(lambda > 0.0) {
        return arg_err("lambda must be positive");
    }
    let phit = sparse_transpose(phi);
    let a = matrix_shift(&sparse_matmat(&phit, phi, threads)?, lambda)?;
    let rhs = sparse_matvec(&phit, f, threads)?;
    let p = jacobi_preconditioner(&a)?;
    bicgstab_solve(&a, &rhs, &p, tol, maxit, threads)
}

/// `ε = ‖f − f̂(μ)‖₂`. Counts one evaluation; a failed solve gives `+∞`.
pub fn approx_objective(mu: &[f64], problem: &RbfProblem) -> f64 {
    problem.evaluations.fetch_add(1, Ordering::Relaxed);
    match problem.evaluate(mu, None) {
        Ok(e) => e.eps,
        Err(_) => {
            problem.failures.fetch_add(1, Ordering::Relaxed);
            f64::INFINITY
        }
    }
}

/// The problem as seen by the optimisers: box bounds on every coordinate
/// plus, for curve instances, one signed-distance equality per centre.
pub fn objective_problem(problem: Arc<RbfProblem>, x0: Vec<f64>) -> Result<ObjectiveProblem> {
    let p = problem.clone();
    let mut op = ObjectiveProblem::new(problem.dim(), move |mu| approx_objective(mu, &p))?
        .with_bounds(problem.variable_bounds())?
        .with_x0(x0)?;
    if let Some(ConstraintSet {
        kind: ConstraintKind::CurveEquality(curve),
        tolerance,
    }) = &problem.constraints
    {
        let c = curve.clone();
        op = op.with_equality(problem.n_centres, *tolerance, move |mu| signed_curve_distance(&c, mu))?;
    }
    Ok(op)
}

/// Samples `Φ(μ)β` on the problem's domain.
pub fn reconstruct(mu: &[f64], beta: &[f64], problem: &RbfProblem) -> Result<Signal> {
    if mu.len() != problem.dim() || beta.len() != problem.n_centres {
        return arg_err("reconstruct: dimension mismatch");
    }
    let phi = assemble_gram(problem.signal.points(), &unflatten(mu), problem.kernel, problem.k, problem.threads)?;
    problem.signal.with_values(sparse_matvec(&phi, beta, problem.threads)?)
}

/// Componentwise clamp into `bounds`.
pub fn project_to_bounds(mu: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    mu.iter().zip(bounds).map(|(v, b)| v.clamp(b[0], b[1])).collect()
}

/// Grid instance on `[0,1]²` with the sine-mix signal.
pub fn grid_problem(side: usize, n_centres: usize, k: usize, seed: u64) -> Result<RbfProblem> {
    let signal = crate::instances::make_grid_signal(side, crate::instances::GridGenerator::SineMix, seed)?;
    let b = ConstraintSet::bounds(vec![[0.0, 1.0]; 2 * n_centres]);
    Ok(RbfProblem::new(signal, n_centres, k, DEFAULT_LAMBDA, [[0.0, 1.0], [0.0, 1.0]])?.with_constraints(b))
}

/// Curve instance: a smooth signal sampled on `m` curve points, centres
/// constrained to the interpolating curve.
pub fn curve_problem(kind: CurveKind, m: usize, n_centres: usize, k: usize, seed: u64) -> Result<RbfProblem> {
    let samples = crate::instances::sample_curve(kind, m, seed)?;
    let mix = SineMix::new(seed);
    let values = samples.points().iter().map(|p| mix.eval([0.25 * p[0], 0.25 * p[1]])).collect();
    let signal = Signal::new(samples.points().to_vec(), values, DomainKind::Curve)?;
    let bounds = padded_box(&samples);
    let curve = fit_interpolating_curve(&samples)?;
    let c = ConstraintSet::curve(curve, DEFAULT_CONSTRAINT_TOL)?;
    Ok(RbfProblem::new(signal, n_centres, k, DEFAULT_LAMBDA, bounds)?.with_constraints(c))
}

fn padded_box(c: &CurvePoints) -> [[f64; 2]; 2] {
    let mut b = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
    for p in c.points() {
        for d in 0..2 {
            b[d][0] = b[d][0].min(p[d]);
            b[d][1] = b[d][1].max(p[d]);
        }
    }
    for d in b.iter_mut() {
        let pad = 0.1 * (d[1] - d[0]);
        d[0] -= pad;
        d[1] += pad;
    }
    b
}
