use crate::error::{arg_err, Error, Result};
use crate::linalg::sparse::sparse_matvec_into;
use crate::parallel::{dot, norm2, par_update};
use crate::types::SparseMatrixCSR;

const BREAKDOWN: f64 = 1e-300;

/// Applies an approximate inverse `z = M⁻¹ r`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Point-Jacobi preconditioner: elementwise division by the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &SparseMatrixCSR) -> Result<Self> {
        if a.rows() != a.cols() {
            return arg_err("Jacobi preconditioner needs a square matrix");
        }
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(row, d)| if d == 0.0 { Err(Error::SingularPreconditioner { row }) } else { Ok(1.0 / d) })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { inv_diag })
    }

    pub fn inverse_diagonal(&self) -> &[f64] {
        &self.inv_diag
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

pub fn jacobi_preconditioner(a: &SparseMatrixCSR) -> Result<JacobiPreconditioner> {
    JacobiPreconditioner::new(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b − A x‖₂` recomputed for the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

fn residual(a: &SparseMatrixCSR, b: &[f64], x: &[f64], r: &mut [f64], threads: usize) {
    sparse_matvec_into(a, x, r, threads).expect("dimensions checked by caller");
    par_update(threads, r, |i, ax| b[i] - ax);
}

/// Preconditioned BiCGSTAB. Stops when `‖b − Ax‖₂ ≤ tol·‖b‖₂` holds for the
/// recomputed residual. On a ρ or ω breakdown the iteration restarts once
/// from the current iterate; a second breakdown is an error. If `maxit` is
/// exhausted the best iterate seen is returned with `converged = false`.
pub fn bicgstab_solve(
    a: &SparseMatrixCSR,
    b: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
    threads: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.rows();
    if a.cols() != n {
        return arg_err("BiCGSTAB needs a square matrix");
    }
    if b.len() != n {
        return arg_err(format!("right-hand side has length {}, expected {n}", b.len()));
    }
    if !(tol > 0.0) || maxit == 0 {
        return arg_err("BiCGSTAB needs tol > 0 and maxit >= 1");
    }
    let bnorm = norm2(threads, b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }
    let target = tol * bnorm;

    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut fresh = true;
    let mut restarted = false;

    let mut best_x = x.clone();
    let mut best_res = bnorm;

    let mut it = 0;
    while it < maxit {
        it += 1;
        let rho = dot(threads, &r_hat, &r);
        if rho.abs() < BREAKDOWN {
            if restarted {
                return Err(Error::Breakdown { iterations: it });
            }
            restarted = true;
            residual(a, b, &x, &mut r, threads);
            r_hat.copy_from_slice(&r);
            fresh = true;
            continue;
        }
        if fresh {
            p.copy_from_slice(&r);
            fresh = false;
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            par_update(threads, &mut p, |i, pi| r[i] + beta * (pi - omega * v[i]));
        }
        precond.apply(&p, &mut p_hat);
        sparse_matvec_into(a, &p_hat, &mut v, threads)?;
        let rv = dot(threads, &r_hat, &v);
        if rv.abs() < BREAKDOWN {
            if restarted {
                return Err(Error::Breakdown { iterations: it });
            }
            restarted = true;
            residual(a, b, &x, &mut r, threads);
            r_hat.copy_from_slice(&r);
            fresh = true;
            continue;
        }
        alpha = rho / rv;
        // s overwrites r
        par_update(threads, &mut r, |i, ri| ri - alpha * v[i]);
        let snorm = norm2(threads, &r);
        if snorm <= target {
            par_update(threads, &mut x, |i, xi| xi + alpha * p_hat[i]);
            if let Some(done) = check_true(a, b, &x, &mut r, target, threads) {
                return Ok((x, SolveStats { iterations: it, final_residual: done, converged: true }));
            }
            r_hat.copy_from_slice(&r);
            fresh = true;
            continue;
        }
        precond.apply(&r, &mut s_hat);
        sparse_matvec_into(a, &s_hat, &mut t, threads)?;
        let tt = dot(threads, &t, &t);
        omega = if tt > 0.0 { dot(threads, &t, &r) / tt } else { 0.0 };
        par_update(threads, &mut x, |i, xi| xi + alpha * p_hat[i] + omega * s_hat[i]);
        par_update(threads, &mut r, |i, si| si - omega * t[i]);
        let rnorm = norm2(threads, &r);
        if rnorm < best_res {
            best_res = rnorm;
            best_x.copy_from_slice(&x);
        }
        if rnorm <= target {
            if let Some(done) = check_true(a, b, &x, &mut r, target, threads) {
                return Ok((x, SolveStats { iterations: it, final_residual: done, converged: true }));
            }
            r_hat.copy_from_slice(&r);
            fresh = true;
            continue;
        }
        if omega.abs() < BREAKDOWN {
            if restarted {
                return Err(Error::Breakdown { iterations: it });
            }
            restarted = true;
            residual(a, b, &x, &mut r, threads);
            r_hat.copy_from_slice(&r);
            fresh = true;
            continue;
        }
        rho_old = rho;
    }

    // maxit exhausted: return whichever of the final and best iterates has the
    // smaller true residual
    let mut tmp = vec![0.0; n];
    residual(a, b, &x, &mut tmp, threads);
    let final_res = norm2(threads, &tmp);
    residual(a, b, &best_x, &mut tmp, threads);
    let best_true = norm2(threads, &tmp);
    let (x, res) = if best_true < final_res { (best_x, best_true) } else { (x, final_res) };
    Ok((
        x,
        SolveStats {
            iterations: it,
            final_residual: res,
            converged: res <= target,
        },
    ))
}

/// Recomputes `r = b − Ax`; returns its norm if it meets the target.
fn check_true(
    a: &SparseMatrixCSR,
    b: &[f64],
    x: &[f64],
    r: &mut [f64],
    target: f64,
    threads: usize,
) -> Option<f64> {
    residual(a, b, x, r, threads);
    let res = norm2(threads, r);
    (res <= target).then_some(res)
}
