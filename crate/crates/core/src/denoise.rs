//! Singular-value shrinkage denoising.
//!
//! With `f ≈ U·diag(S)·Vᵀ` fixed, the variables are per-value thresholds
//! `μ` and the objective is `‖f − U·diag(S − μ)·Vᵀ‖_F² + α·Σ(S − μ)`,
//! subject to `0 ≤ μ_i ≤ S_i − δ`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{arg_err, Result};
use crate::optim::ObjectiveProblem;
use crate::linalg::{dense_matmat, dense_transpose, sparse_dense_matmat, svd_lanczos, SvdFactors};
use crate::parallel;
use crate::types::{DenseMatrix, SparseMatrixCSR};

/// Relative margin for the strict inequality `S − μ > 0`.
pub const DELTA_REL: f64 = 1e-9;
/// SVD tolerance used when a problem factorises its own input.
pub const PROBLEM_SVD_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct DenoiseProblem {
    pub f: DenseMatrix,
    pub svd: SvdFactors,
    pub alpha: f64,
    pub delta: f64,
    pub threads: usize,
    vt: DenseMatrix,
    evaluations: AtomicUsize,
}

/// Wall time per stage of one objective evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenoiseStageTimes {
    pub svd: Duration,
    pub mat_shift: Duration,
    pub mat_transpose: Duration,
    pub mat_mat_mult_sparse: Duration,
    pub mat_mat_mult_dense: Duration,
    pub mat_add: Duration,
    pub mat_norm: Duration,
    pub vec_norm: Duration,
}

impl DenoiseStageTimes {
    pub fn total(&self) -> Duration {
        self.svd
            + self.mat_shift
            + self.mat_transpose
            + self.mat_mat_mult_sparse
            + self.mat_mat_mult_dense
            + self.mat_add
            + self.mat_norm
            + self.vec_norm
    }

    pub fn named(&self) -> Vec<(&'static str, Duration)> {
        vec![
            ("svd", self.svd),
            ("mat_shift", self.mat_shift),
            ("mat_transpose", self.mat_transpose),
            ("mat_mat_mult_sparse", self.mat_mat_mult_sparse),
            ("mat_mat_mult_dense", self.mat_mat_mult_dense),
            ("mat_add", self.mat_add),
            ("mat_norm", self.mat_norm),
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

impl DenoiseProblem {
    /// Factorises `f` (leading `nsv` triples) and builds the problem.
    pub fn new(f: DenseMatrix, nsv: usize, alpha: f64, threads: usize) -> Result<Self> {
        let svd = svd_lanczos(&f, nsv, PROBLEM_SVD_TOL, threads)?;
        Self::from_factors(f, svd, alpha, threads)
    }

    pub fn from_factors(f: DenseMatrix, svd: SvdFactors, alpha: f64, threads: usize) -> Result<Self> {
        if !(alpha >= 0.0) {
            return arg_err("alpha must be non-negative");
        }
        if svd.u.rows() != f.rows() || svd.v.rows() != f.cols() {
            return arg_err("SVD factors do not match the input shape");
        }
        let s1 = svd.s.first().copied().unwrap_or(0.0);
        let delta = if s1 > 0.0 { DELTA_REL * s1 } else { DELTA_REL };
        let vt = dense_transpose(&svd.v);
        Ok(Self {
            f,
            svd,
            alpha,
            delta,
            threads: threads.max(1),
            vt,
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    fn check_len(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.rank() {
            return arg_err(format!("expected {} thresholds, got {}", self.rank(), mu.len()));
        }
        Ok(())
    }

    /// True when `0 ≤ μ_i ≤ S_i − δ` for all `i`.
    pub fn is_feasible(&self, mu: &[f64]) -> bool {
        mu.len() == self.rank() && threshold_bounds(self).iter().zip(mu).all(|(b, m)| *m >= b[0] && *m <= b[1])
    }

    /// Objective without counting, optionally recording stage times.
    pub fn evaluate(&self, mu: &[f64], times: Option<&mut DenoiseStageTimes>) -> Result<f64> {
        self.check_len(mu)?;
        let mut local = DenoiseStageTimes::default();
        let t = match times {
            Some(t) => t,
            None => &mut local,
        };
        let th = self.threads;
        let s_hat = timed(&mut t.mat_shift, || {
            let diag: Vec<f64> = self.svd.s.iter().zip(mu).map(|(s, m)| s - m).collect();
            SparseMatrixCSR::from_diag(&diag)
        });
        let vt = timed(&mut t.mat_transpose, || dense_transpose(&self.svd.v));
        let sv = timed(&mut t.mat_mat_mult_sparse, || sparse_dense_matmat(&s_hat, &vt, th))?;
        let fhat = timed(&mut t.mat_mat_mult_dense, || dense_matmat(&self.svd.u, &sv, th))?;
        let mut diff = fhat.into_data();
        let f = self.f.data();
        timed(&mut t.mat_add, || parallel::par_update(th, &mut diff, |i, v| f[i] - v));
        let eps1 = timed(&mut t.mat_norm, || parallel::dot(th, &diff, &diff));
        let eps2 = timed(&mut t.vec_norm, || s_hat.values().iter().map(|v| v.abs()).sum::<f64>());
        Ok(eps1 + self.alpha * eps2)
    }

    /// Factorisation plus one evaluation, as timed by the scaling harness.
    pub fn evaluate_with_svd(&self, mu: &[f64], times: &mut DenoiseStageTimes) -> Result<f64> {
        let nsv = self.rank();
        timed(&mut times.svd, || svd_lanczos(&self.f, nsv, PROBLEM_SVD_TOL, self.threads))?;
        self.evaluate(mu, Some(times))
    }
}

/// `ε(μ) = ‖f − U·diag(S − μ)·Vᵀ‖_F² + α·Σ(S_i − μ_i)`; counts one evaluation.
pub fn denoise_objective(mu: &[f64], problem: &DenoiseProblem) -> Result<f64> {
    problem.check_len(mu)?;
    problem.evaluations.fetch_add(1, Ordering::Relaxed);
    problem.evaluate(mu, None)
}

/// `∇ε = 2μ − α`.
pub fn denoise_gradient(mu: &[f64], problem: &DenoiseProblem) -> Result<Vec<f64>> {
    problem.check_len(mu)?;
    Ok(mu.iter().map(|m| 2.0 * m - problem.alpha).collect())
}

/// `μ*_i = clamp(α/2, 0, S_i − δ)`.
pub fn denoise_closed_form(problem: &DenoiseProblem) -> Vec<f64> {
    threshold_bounds(problem)
        .iter()
        .map(|b| (problem.alpha / 2.0).clamp(b[0], b[1]))
        .collect()
}

/// The problem as seen by the optimisers, optionally with the analytic gradient.
pub fn objective_problem(problem: Arc<DenoiseProblem>, analytic_gradient: bool) -> Result<ObjectiveProblem> {
    let p = problem.clone();
    let op = ObjectiveProblem::new(problem.rank(), move |mu| denoise_objective(mu, &p).unwrap_or(f64::INFINITY))?
        .with_bounds(threshold_bounds(&problem))?;
    Ok(if analytic_gradient {
        let alpha = problem.alpha;
        op.with_gradient(move |mu| mu.iter().map(|m| 2.0 * m - alpha).collect())
    } else {
        op
    })
}

/// `[0, S_i − δ]` per threshold.
pub fn threshold_bounds(problem: &DenoiseProblem) -> Vec<[f64; 2]> {
    problem.svd.s.iter().map(|s| [0.0, (s - problem.delta).max(0.0)]).collect()
}

/// `U·diag(S − μ)·Vᵀ`.
pub fn denoised_image(mu: &[f64], problem: &DenoiseProblem) -> Result<DenseMatrix> {
    problem.check_len(mu)?;
    let mut us = problem.svd.u.clone();
    for i in 0..us.rows() {
        for (k, (s, m)) in problem.svd.s.iter().zip(mu).enumerate() {
            us.set(i, k, us.get(i, k) * (s - m));
        }
    }
    dense_matmat(&us, &problem.vt, problem.threads)
}
