//! Small dense eigen/singular value routines used inside the Krylov SVD
//! methods and the principal-axis optimiser.

use crate::types::DenseMatrix;

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// method. `diag` has length `n`, `off[i]` couples rows `i` and `i+1`.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of an `n × n` matrix.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, DenseMatrix) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    // column-major eigenvector storage: z[col][row]
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (left, right) = z.split_at_mut(i + 1);
                let (zi, zi1) = (&mut left[i], &mut right[0]);
                for k in 0..n {
                    let f = zi1[k];
                    zi1[k] = s * zi[k] + c * f;
                    zi[k] = c * zi[k] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let mut vecs = DenseMatrix::zeros(n, n);
    let vals = order
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            vecs.set_column(col, &z[k]);
            d[k]
        })
        .collect();
    (vals, vecs)
}

/// Thin SVD of a small dense matrix by one-sided Jacobi rotations.
/// Returns `(U, s, V)` with `s` descending, `U` `m × r`, `V` `n × r`,
/// `r = min(m, n)`; columns of `U` belonging to zero singular values are
/// completed to an orthonormal set.
pub fn jacobi_svd(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    if a.rows() < a.cols() {
        let (u, s, v) = jacobi_svd(&crate::linalg::dense::dense_transpose(a));
        return (v, s, u);
    }
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    alpha += cols[p][k] * cols[p][k];
                    beta += cols[q][k] * cols[q][k];
                    gamma += cols[p][k] * cols[q][k];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vm = DenseMatrix::zeros(n, n);
    for (out, &k) in order.iter().enumerate() {
        let sk = norms[k];
        let mut u: Vec<f64> = if sk > 1e-300 && sk > 1e-14 * smax {
            cols[k].iter().map(|x| x / sk).collect()
        } else {
            vec![0.0; m]
        };
        if !orthonormalise(&mut u, &u_cols) {
            u = complete_basis(&u_cols, m);
        }
        u_cols.push(u);
        s.push(sk);
        vm.set_column(out, &v[k]);
    }
    let mut um = DenseMatrix::zeros(m, n);
    for (j, c) in u_cols.iter().enumerate() {
        um.set_column(j, c);
    }
    (um, s, vm)
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (p, q) = (*a, *b);
        *a = c * p - s * q;
        *b = s * p + c * q;
    }
}

/// Two passes of Gram-Schmidt against `basis`, then normalisation. Returns
/// false if the vector vanished (lies in the span of `basis`).
pub(crate) fn orthonormalise(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let before = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if before == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in basis {
            let c: f64 = b.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            for (x, bb) in v.iter_mut().zip(b) {
                *x -= c * bb;
            }
        }
    }
    let after = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if after <= 1e-10 * before {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= after);
    true
}

/// A unit vector orthogonal to every vector in `basis`.
pub(crate) fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[(k * 7 + basis.len()) % dim] = 1.0;
        if orthonormalise(&mut e, basis) {
            return e;
        }
    }
    // basis already spans the space: cannot happen when basis.len() < dim
    vec![0.0; dim]
}
