//! Partial SVD by two Krylov routes:
//!
//! * **cross**: Lanczos tridiagonalisation of `AᵀA` (or `AAᵀ`, whichever is
//!   smaller), applied as two products without forming the cross matrix.
//! * **lanczos**: Golub-Kahan-Lanczos bidiagonalisation `A Q = P B` with full
//!   reorthogonalisation and thick restart once the basis reaches
//!   `2·nsv + 16` columns.
//!
//! Both methods run a main pass for the leading `nsv` triples, then repeat
//! single-triple passes deflated against the accepted set until no larger
//! singular value turns up. A single Krylov sequence only ever sees one
//! direction of a repeated singular value; the deflated passes pick up the
//! missing copies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::instances::rng;
use crate::linalg::dense::{dense_matvec, dense_transpose};
use crate::linalg::eigen::{complete_basis, jacobi_svd, orthonormalise, tridiagonal_eigen};
use crate::linalg::sparse::{sparse_matvec, sparse_transpose};
use crate::parallel;
use crate::types::{DenseMatrix, SparseMatrixCSR};

/// Default convergence tolerance for both SVD methods.
pub const DEFAULT_SVD_TOL: f64 = 1e-6;

/// Borrowed dense or sparse matrix.
#[derive(Debug, Clone, Copy)]
pub enum MatrixRef<'a> {
    Dense(&'a DenseMatrix),
    Sparse(&'a SparseMatrixCSR),
}

impl<'a> From<&'a DenseMatrix> for MatrixRef<'a> {
    fn from(m: &'a DenseMatrix) -> Self {
        MatrixRef::Dense(m)
    }
}

impl<'a> From<&'a SparseMatrixCSR> for MatrixRef<'a> {
    fn from(m: &'a SparseMatrixCSR) -> Self {
        MatrixRef::Sparse(m)
    }
}

impl MatrixRef<'_> {
    pub fn rows(&self) -> usize {
        match self {
            MatrixRef::Dense(m) => m.rows(),
            MatrixRef::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatrixRef::Dense(m) => m.cols(),
            MatrixRef::Sparse(m) => m.cols(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            MatrixRef::Dense(m) => m.frobenius_norm(),
            MatrixRef::Sparse(m) => m.frobenius_norm(),
        }
    }

    /// Row `i` as a dense vector.
    fn dense_row(&self, i: usize) -> Vec<f64> {
        match self {
            MatrixRef::Dense(m) => m.row(i).to_vec(),
            MatrixRef::Sparse(m) => {
                let mut r = vec![0.0; m.cols()];
                let (c, v) = m.row(i);
                for (j, x) in c.iter().zip(v) {
                    r[*j] = *x;
                }
                r
            }
        }
    }
}

/// `A` together with an explicit transpose so both products are row-parallel.
enum OwnedOp<'a> {
    Dense(&'a DenseMatrix, DenseMatrix),
    Sparse(&'a SparseMatrixCSR, SparseMatrixCSR),
}

struct Operator<'a> {
    op: OwnedOp<'a>,
    threads: usize,
    matvec_pairs: usize,
}

impl<'a> Operator<'a> {
    fn new(a: MatrixRef<'a>, threads: usize) -> Self {
        let op = match a {
            MatrixRef::Dense(m) => OwnedOp::Dense(m, dense_transpose(m)),
            MatrixRef::Sparse(m) => OwnedOp::Sparse(m, sparse_transpose(m)),
        };
        Self {
            op,
            threads,
            matvec_pairs: 0,
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.op {
            OwnedOp::Dense(a, _) => dense_matvec(a, x, self.threads),
            OwnedOp::Sparse(a, _) => sparse_matvec(a, x, self.threads),
        }
        .expect("operator dimensions are fixed")
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        match &self.op {
            OwnedOp::Dense(_, t) => dense_matvec(t, y, self.threads),
            OwnedOp::Sparse(_, t) => sparse_matvec(t, y, self.threads),
        }
        .expect("operator dimensions are fixed")
    }
}

/// Leading singular triples `A ≈ U·diag(S)·Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    /// `‖A − U·diag(S)·Vᵀ‖_F²`.
    pub residual_sq: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Dense `U·diag(S)·Vᵀ`.
    pub fn reconstruct(&self, threads: usize) -> DenseMatrix {
        let mut us = self.u.clone();
        let r = self.rank();
        for i in 0..us.rows() {
            for k in 0..r {
                let val = us.get(i, k) * self.s[k];
                us.set(i, k, val);
            }
        }
        crate::linalg::dense::dense_matmat(&us, &dense_transpose(&self.v), threads).expect("shapes agree")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtracts projections onto `basis` (two passes), returning the
/// accumulated coefficients.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, b) in coef.iter_mut().zip(basis) {
            let d = dotp(b, v);
            *c += d;
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
    }
    coef
}

fn random_unit(r: &mut ChaCha8Rng, dim: usize, against: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        for basis in against {
            project_out(&mut v, basis);
        }
        for basis in against {
            project_out(&mut v, basis);
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return Some(v);
        }
    }
    None
}

/// Unit start vector in `range(Aᵀ)`, orthogonal to `against`. A random
/// vector would carry a null-space component for wide matrices, which keeps
/// the bidiagonalisation from terminating after `min(m, n)` steps.
fn range_start(op: &Operator<'_>, r: &mut ChaCha8Rng, locked_u: &[Vec<f64>], against: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    let (m, n) = (op_rows(op), op_cols(op));
    if m < n {
        for _ in 0..4 {
            let g = random_unit(r, m, &[locked_u])?;
            let mut v = op.apply_t(&g);
            let full = norm(&v);
            for _ in 0..2 {
                for basis in against {
                    project_out(&mut v, basis);
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 * full {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
    }
    random_unit(r, n, against)
}

fn combine(basis: &[Vec<f64>], coef: impl Fn(usize) -> f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (k, b) in basis.iter().enumerate() {
        let c = coef(k);
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
    }
    out
}

struct Budget {
    remaining: usize,
}

impl Budget {
    fn take(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        true
    }
}

fn validate(a: MatrixRef<'_>, nsv: usize, tol: f64) -> Result<()> {
    let r = a.rows().min(a.cols());
    if nsv == 0 || nsv > r {
        return arg_err(format!("nsv = {nsv} outside 1..={r}"));
    }
    if !(tol > 0.0) {
        return arg_err("SVD tolerance must be positive");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cross-product method

/// Eigenpairs of the (deflated) cross operator.
struct EigRun {
    pairs: Vec<(f64, Vec<f64>)>,
    complete: bool,
}

/// Lanczos with full reorthogonalisation on `G` restricted to the complement
/// of `locked`, until the top `want` Ritz pairs satisfy `accept`.
fn cross_lanczos(
    g: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    dim: usize,
    want: usize,
    locked: &[Vec<f64>],
    accept: &dyn Fn(f64, f64) -> bool,
    budget: &mut Budget,
    r: &mut ChaCha8Rng,
) -> Result<EigRun> {
    let avail = dim - locked.len();
    let want = want.min(avail);
    let mut q_basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    let mut q = random_unit(r, dim, &[locked]).ok_or_else(|| Error::Argument("no start vector".into()))?;
    loop {
        if !budget.take() {
            return Err(Error::SvdNotConverged { converged: 0, requested: want });
        }
        let mut w = g(&q);
        project_out(&mut w, locked);
        let alpha = dotp(&q, &w);
        q_basis.push(q);
        project_out(&mut w, &q_basis);
        project_out(&mut w, locked);
        let beta = norm(&w);
        alphas.push(alpha);
        scale = scale.max(alpha.abs() + beta);
        let k = q_basis.len();
        let tiny = beta <= 1e-12 * scale.max(1e-300);
        let complete = k == avail;
        if k >= want && (complete || tiny || k % 4 == 0 || k == want) {
            let (vals, vecs) = tridiagonal_eigen(&alphas, &betas);
            let done = complete
                || (0..want).all(|i| {
                    let rho = if tiny { 0.0 } else { beta * vecs.get(k - 1, i).abs() };
                    accept(vals[i], rho)
                });
            if done {
                let pairs = (0..want)
                    .map(|i| (vals[i], combine(&q_basis, |j| vecs.get(j, i), dim)))
                    .collect();
                return Ok(EigRun { pairs, complete });
            }
        }
        if tiny {
            // invariant subspace: continue from a fresh direction
            q = random_unit(r, dim, &[locked, &q_basis]).ok_or_else(|| Error::Argument("no restart vector".into()))?;
            betas.push(0.0);
        } else {
            q = w.iter().map(|x| x / beta).collect();
            betas.push(beta);
        }
    }
}

/// Partial SVD through the implicit cross-product matrix.
pub fn svd_cross<'a>(a: impl Into<MatrixRef<'a>>, nsv: usize, tol: f64, threads: usize) -> Result<SvdFactors> {
    let a = a.into();
    validate(a, nsv, tol)?;
    let op = Operator::new(a, threads);
    let (m, n) = (a.rows(), a.cols());
    // eigenvectors live on the smaller side
    let right_side = n <= m;
    let dim = m.min(n);
    let mut budget = Budget { remaining: 100 * nsv.max(dim.min(nsv + 16)) };
    let mut r = rng(0x5eed);
    let mut g = |x: &[f64]| -> Vec<f64> {
        if right_side {
            op.apply_t(&op.apply(x))
        } else {
            op.apply(&op.apply_t(x))
        }
    };
    let s1_hint = std::cell::Cell::new(0.0f64);
    let accept = |theta: f64, rho: f64| {
        let s = theta.max(0.0).sqrt();
        let s1 = s1_hint.get().max(s);
        rho <= 0.5 * tol * s1 * s.max(tol * s1)
    };

    let main = cross_lanczos(&mut g, dim, nsv, &[], &accept, &mut budget, &mut r)
        .map_err(|_| Error::SvdNotConverged { converged: 0, requested: nsv })?;
    let mut pairs = main.pairs;
    if !main.complete {
        s1_hint.set(pairs[0].0.max(0.0).sqrt());
        loop {
            let locked: Vec<Vec<f64>> = pairs.iter().map(|p| p.1.clone()).collect();
            if locked.len() >= dim {
                break;
            }
            let cand = cross_lanczos(&mut g, dim, 1, &locked, &accept, &mut budget, &mut r).map_err(|_| {
                Error::SvdNotConverged {
                    converged: nsv,
                    requested: nsv,
                }
            })?;
            let (theta, vec) = cand.pairs.into_iter().next().unwrap();
            let last = pairs.last().unwrap().0.max(0.0).sqrt();
            let s1 = pairs[0].0.max(0.0).sqrt();
            if theta.max(0.0).sqrt() <= last + 0.5 * tol * s1 {
                break;
            }
            pairs.pop();
            let pos = pairs.iter().position(|p| p.0 < theta).unwrap_or(pairs.len());
            pairs.insert(pos, (theta, vec));
        }
    }
    let _ = op.matvec_pairs;

    // turn eigenvectors of the cross operator into singular triples
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = pairs
        .into_iter()
        .map(|(_, x)| {
            let other = if right_side { op.apply(&x) } else { op.apply_t(&x) };
            (norm(&other), x, other)
        })
        .collect();
    triples.sort_by(|p, q| q.0.total_cmp(&p.0));
    let smax = triples.first().map_or(0.0, |t| t.0);
    let mut others: Vec<Vec<f64>> = Vec::with_capacity(nsv);
    let mut svals = Vec::with_capacity(nsv);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(nsv);
    let other_dim = if right_side { m } else { n };
    for (s, x, mut y) in triples {
        let ok = s > 1e-300 && s > 1e-14 * smax && orthonormalise(&mut y, &others);
        if !ok {
            y = complete_basis(&others, other_dim);
        }
        others.push(y);
        svals.push(s);
        found.push(x);
    }
    let (u_cols, v_cols) = if right_side { (others, found) } else { (found, others) };
    finish(a, u_cols, svals, v_cols, threads)
}

// ---------------------------------------------------------------------------
// Golub-Kahan-Lanczos bidiagonalisation

struct TripleRun {
    triples: Vec<(f64, Vec<f64>, Vec<f64>)>,
    complete: bool,
}

#[allow(clippy::too_many_arguments)]
fn gkl(
    op: &Operator<'_>,
    want: usize,
    locked_u: &[Vec<f64>],
    locked_v: &[Vec<f64>],
    kmax: usize,
    tol: f64,
    s1_hint: f64,
    budget: &mut Budget,
    r: &mut ChaCha8Rng,
) -> Result<TripleRun> {
    let (m, n) = (op_rows(op), op_cols(op));
    let avail = m.min(n) - locked_v.len();
    let want = want.min(avail);
    let kmax = kmax.min(avail).max(want + 1).min(avail);
    let fail = || Error::SvdNotConverged { converged: 0, requested: want };

    let mut qs: Vec<Vec<f64>> = vec![range_start(op, r, locked_u, &[locked_v]).ok_or_else(fail)?];
    let mut ps: Vec<Vec<f64>> = Vec::new();
    // b[i][j], upper triangular, grows with the basis
    let mut b: Vec<Vec<f64>> = Vec::new();
    let mut scale = 0.0f64;
    loop {
        let j = ps.len();
        if !budget.take() {
            return Err(fail());
        }
        // left vector
        let mut p = op.apply(&qs[j]);
        let coef = project_out(&mut p, &ps);
        project_out(&mut p, locked_u);
        let mut alpha = norm(&p);
        if alpha <= 1e-13 * scale.max(1e-300) {
            p = random_unit(r, m, &[locked_u, &ps]).ok_or_else(fail)?;
            alpha = 0.0;
        } else {
            p.iter_mut().for_each(|x| *x /= alpha);
        }
        for row in b.iter_mut() {
            row.push(0.0);
        }
        for (i, c) in coef.iter().enumerate() {
            b[i][j] = *c;
        }
        let mut new_row = vec![0.0; j + 1];
        new_row[j] = alpha;
        b.push(new_row);
        ps.push(p);
        // right residual
        let mut rvec = op.apply_t(&ps[j]);
        project_out(&mut rvec, &qs);
        project_out(&mut rvec, locked_v);
        let beta = norm(&rvec);
        scale = scale.max(alpha + beta);
        let k = j + 1;
        let tiny = beta <= 1e-12 * scale.max(1e-300);
        // a wide matrix can pick up null-space drift, so a full basis alone is not enough
        let complete = k == avail && tiny;

        if k >= want && (complete || tiny || k == kmax || k % 4 == 0) {
            let bm = DenseMatrix::from_rows(&b).expect("square");
            let (x, sig, y) = jacobi_svd(&bm);
            let s1 = s1_hint.max(sig[0]);
            let converged = complete
                || (0..want).all(|i| {
                    let res = if tiny { 0.0 } else { beta * x.get(k - 1, i).abs() };
                    res <= 0.1 * tol * s1
                });
            if converged {
                let triples = (0..want)
                    .map(|i| {
                        (
                            sig[i],
                            combine(&ps, |t| x.get(t, i), m),
                            combine(&qs, |t| y.get(t, i), n),
                        )
                    })
                    .collect();
                return Ok(TripleRun { triples, complete });
            }
            if k == kmax && !tiny {
                // thick restart: keep the leading Ritz vectors
                let keep = (want + (kmax - want) / 2).min(k - 1).max(want);
                let new_p: Vec<Vec<f64>> = (0..keep).map(|i| combine(&ps, |t| x.get(t, i), m)).collect();
                let new_q: Vec<Vec<f64>> = (0..keep).map(|i| combine(&qs, |t| y.get(t, i), n)).collect();
                ps = new_p;
                qs = new_q;
                b = (0..keep)
                    .map(|i| {
                        let mut row = vec![0.0; keep];
                        row[i] = sig[i];
                        row
                    })
                    .collect();
                let mut q = rvec;
                project_out(&mut q, &qs);
                project_out(&mut q, locked_v);
                let qn = norm(&q);
                q.iter_mut().for_each(|v| *v /= qn);
                qs.push(q);
                continue;
            }
        }
        let q = if tiny {
            range_start(op, r, locked_u, &[locked_v, &qs]).ok_or_else(fail)?
        } else {
            rvec.iter().map(|v| v / beta).collect()
        };
        qs.push(q);
    }
}

fn op_rows(op: &Operator<'_>) -> usize {
    match &op.op {
        OwnedOp::Dense(a, _) => a.rows(),
        OwnedOp::Sparse(a, _) => a.rows(),
    }
}

fn op_cols(op: &Operator<'_>) -> usize {
    match &op.op {
        OwnedOp::Dense(a, _) => a.cols(),
        OwnedOp::Sparse(a, _) => a.cols(),
    }
}

/// Partial SVD by Lanczos bidiagonalisation with thick restart.
pub fn svd_lanczos<'a>(a: impl Into<MatrixRef<'a>>, nsv: usize, tol: f64, threads: usize) -> Result<SvdFactors> {
    let a = a.into();
    validate(a, nsv, tol)?;
    let op = Operator::new(a, threads);
    let kmax = 2 * nsv + 16;
    let mut budget = Budget { remaining: 100 * nsv.max(a.rows().min(a.cols()).min(nsv + 16)) };
    let mut r = rng(0xb1d1a9);
    let main = gkl(&op, nsv, &[], &[], kmax, tol, 0.0, &mut budget, &mut r)?;
    let mut triples = main.triples;
    if !main.complete {
        loop {
            let lu: Vec<Vec<f64>> = triples.iter().map(|t| t.1.clone()).collect();
            let lv: Vec<Vec<f64>> = triples.iter().map(|t| t.2.clone()).collect();
            if lv.len() >= a.rows().min(a.cols()) {
                break;
            }
            let s1 = triples[0].0;
            let cand = gkl(&op, 1, &lu, &lv, kmax, tol, s1, &mut budget, &mut r).map_err(|_| {
                Error::SvdNotConverged {
                    converged: nsv,
                    requested: nsv,
                }
            })?;
            let t = cand.triples.into_iter().next().unwrap();
            if t.0 <= triples.last().unwrap().0 + 0.5 * tol * s1 {
                break;
            }
            triples.pop();
            let pos = triples.iter().position(|x| x.0 < t.0).unwrap_or(triples.len());
            triples.insert(pos, t);
        }
    }
    // re-orthonormalise the left vectors, completing any null directions
    let smax = triples[0].0;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(nsv);
    let mut v_cols = Vec::with_capacity(nsv);
    let mut svals = Vec::with_capacity(nsv);
    for (s, mut u, v) in triples {
        let ok = s > 1e-14 * smax && orthonormalise(&mut u, &u_cols);
        if !ok {
            u = complete_basis(&u_cols, a.rows());
        }
        u_cols.push(u);
        v_cols.push(v);
        svals.push(s);
    }
    finish(a, u_cols, svals, v_cols, threads)
}

/// Sign convention, packing, and the truncation residual.
fn finish(
    a: MatrixRef<'_>,
    mut u_cols: Vec<Vec<f64>>,
    s: Vec<f64>,
    mut v_cols: Vec<Vec<f64>>,
    threads: usize,
) -> Result<SvdFactors> {
    for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut best = 0;
        for (i, x) in u.iter().enumerate() {
            if x.abs() > u[best].abs() {
                best = i;
            }
        }
        if u[best] < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let r = s.len();
    let (m, n) = (a.rows(), a.cols());
    let mut um = DenseMatrix::zeros(m, r);
    let mut vm = DenseMatrix::zeros(n, r);
    for k in 0..r {
        um.set_column(k, &u_cols[k]);
        vm.set_column(k, &v_cols[k]);
    }
    let residual_sq = parallel::blocked_sum(threads, m, |rows| {
        let mut acc = 0.0;
        for i in rows {
            let mut row = a.dense_row(i);
            for k in 0..r {
                let c = um.get(i, k) * s[k];
                if c != 0.0 {
                    for (x, j) in row.iter_mut().zip(0..n) {
                        *x -= c * vm.get(j, k);
                    }
                }
            }
            acc += row.iter().map(|x| x * x).sum::<f64>();
        }
        acc
    });
    Ok(SvdFactors {
        u: um,
        s,
        v: vm,
        residual_sq,
    })
}

/// `max_i ‖A v_i − s_i u_i‖₂ / s_1`.
pub fn max_forward_residual<'a>(a: impl Into<MatrixRef<'a>>, f: &SvdFactors) -> f64 {
    residuals(a.into(), f).0
}

/// `(max_i ‖A v_i − s_i u_i‖, max_i ‖Aᵀ u_i − s_i v_i‖)`, both relative to `s_1`.
pub fn residuals(a: MatrixRef<'_>, f: &SvdFactors) -> (f64, f64) {
    let op = Operator::new(a, 1);
    let s1 = f.s.first().copied().unwrap_or(0.0).max(1e-300);
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    for k in 0..f.rank() {
        let v = f.v.column(k);
        let u = f.u.column(k);
        let av = op.apply(&v);
        let atu = op.apply_t(&u);
        let r1 = av.iter().zip(&u).map(|(x, y)| (x - f.s[k] * y).powi(2)).sum::<f64>().sqrt();
        let r2 = atu.iter().zip(&v).map(|(x, y)| (x - f.s[k] * y).powi(2)).sum::<f64>().sqrt();
        fwd = fwd.max(r1 / s1);
        bwd = bwd.max(r2 / s1);
    }
    (fwd, bwd)
}
