use crate::error::{arg_err, Result};
use crate::parallel;
use crate::types::DenseMatrix;

const K_BLOCK: usize = 64;

/// `C = A B`. Each output row is built by streaming `k` in increasing order,
/// so every entry sees the same accumulation order for any thread count.
pub fn dense_matmat(a: &DenseMatrix, b: &DenseMatrix, threads: usize) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return arg_err(format!(
            "matmat: {}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let (inner, n) = (a.cols(), b.cols());
    let mut c = DenseMatrix::zeros(a.rows(), n);
    parallel::par_rows(threads, c.data_mut(), n, |i, row| {
        let arow = a.row(i);
        for kb in (0..inner).step_by(K_BLOCK) {
            for k in kb..(kb + K_BLOCK).min(inner) {
                let aik = arow[k];
                if aik == 0.0 {
                    continue;
                }
                for (o, bv) in row.iter_mut().zip(b.row(k)) {
                    *o += aik * bv;
                }
            }
        }
    });
    Ok(c)
}

pub fn dense_transpose(a: &DenseMatrix) -> DenseMatrix {
    let mut t = DenseMatrix::zeros(a.cols(), a.rows());
    for i in 0..a.rows() {
        for (j, v) in a.row(i).iter().enumerate() {
            t.set(j, i, *v);
        }
    }
    t
}

pub fn dense_matvec(a: &DenseMatrix, x: &[f64], threads: usize) -> Result<Vec<f64>> {
    if x.len() != a.cols() {
        return arg_err("matvec: dimension mismatch");
    }
    let mut y = vec![0.0; a.rows()];
    parallel::par_rows(threads, &mut y, 1, |i, out| {
        out[0] = a.row(i).iter().zip(x).map(|(p, q)| p * q).sum();
    });
    Ok(y)
}

/// `y = Aᵀ x`, accumulating rows of `A` in order.
pub fn dense_matvec_transpose(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.rows() {
        return arg_err("transposed matvec: dimension mismatch");
    }
    let mut y = vec![0.0; a.cols()];
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        for (o, v) in y.iter_mut().zip(a.row(i)) {
            *o += v * xi;
        }
    }
    Ok(y)
}

/// `A - B` entrywise.
pub fn dense_sub(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return arg_err("matrix subtraction: shape mismatch");
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    DenseMatrix::from_vec(a.rows(), a.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_and_hand_example() {
        let a = random(5, 4, 1);
        assert_eq!(dense_matmat(&a, &DenseMatrix::identity(4), 2).unwrap(), a);
        let p = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let q = DenseMatrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        assert_eq!(dense_matmat(&p, &q, 1).unwrap().data(), &[17.0, 39.0]);
        assert!(dense_matmat(&q, &q, 1).is_err());
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let a = random(64, 64, 2);
        let b = random(64, 64, 3);
        let c1 = dense_matmat(&a, &b, 1).unwrap();
        let c4 = dense_matmat(&a, &b, 4).unwrap();
        assert!(c1.data().iter().zip(c4.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn transpose_involution() {
        let a = random(3, 7, 4);
        assert_eq!(dense_transpose(&dense_transpose(&a)), a);
        let x: Vec<f64> = (0..3).map(|i| i as f64 + 0.5).collect();
        let y1 = dense_matvec_transpose(&a, &x).unwrap();
        let y2 = dense_matvec(&dense_transpose(&a), &x, 1).unwrap();
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).abs() < 1e-14);
        }
    }
}
