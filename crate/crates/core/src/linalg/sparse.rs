use crate::error::{arg_err, Result};
use crate::parallel;
use crate::types::{DenseMatrix, SparseMatrixCSR};

/// `y = A x`, each row summed left to right.
pub fn sparse_matvec(a: &SparseMatrixCSR, x: &[f64], threads: usize) -> Result<Vec<f64>> {
    let mut y = vec![0.0; a.rows()];
    sparse_matvec_into(a, x, &mut y, threads)?;
    Ok(y)
}

pub fn sparse_matvec_into(a: &SparseMatrixCSR, x: &[f64], y: &mut [f64], threads: usize) -> Result<()> {
    if x.len() != a.cols() || y.len() != a.rows() {
        return arg_err(format!(
            "matvec: {}x{} matrix with x of length {} into y of length {}",
            a.rows(),
            a.cols(),
            x.len(),
            y.len()
        ));
    }
    parallel::par_rows(threads, y, 1, |i, out| {
        let (cols, vals) = a.row(i);
        let mut s = 0.0;
        for (j, v) in cols.iter().zip(vals) {
            s += v * x[*j];
        }
        out[0] = s;
    });
    Ok(())
}

/// `y = Aᵀ x` without forming the transpose; serial scatter.
pub fn sparse_matvec_transpose(a: &SparseMatrixCSR, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.rows() {
        return arg_err("transposed matvec: dimension mismatch");
    }
    let mut y = vec![0.0; a.cols()];
    for (i, xi) in x.iter().enumerate() {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            y[*j] += v * xi;
        }
    }
    Ok(y)
}

/// Sparse transpose by counting sort; column order within each output row
/// follows the input row order, so the result is canonical.
pub fn sparse_transpose(a: &SparseMatrixCSR) -> SparseMatrixCSR {
    let (m, n) = (a.rows(), a.cols());
    let mut counts = vec![0usize; n + 1];
    for &j in a.col_indices() {
        counts[j + 1] += 1;
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let offsets = counts.clone();
    let mut next = counts;
    let mut cols = vec![0usize; a.nnz()];
    let mut vals = vec![0.0; a.nnz()];
    for i in 0..m {
        let (cs, vs) = a.row(i);
        for (j, v) in cs.iter().zip(vs) {
            let slot = next[*j];
            cols[slot] = i;
            vals[slot] = *v;
            next[*j] += 1;
        }
    }
    SparseMatrixCSR::from_raw_unchecked(n, m, offsets, cols, vals)
}

/// Sparse × sparse (row-wise Gustavson). Every output row is accumulated in
/// the order of `A`'s stored entries, then sorted by column.
pub fn sparse_matmat(a: &SparseMatrixCSR, b: &SparseMatrixCSR, threads: usize) -> Result<SparseMatrixCSR> {
    if a.cols() != b.rows() {
        return arg_err(format!(
            "matmat: {}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let ncols = b.cols();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = if threads <= 1 {
        let mut acc = Accumulator::new(ncols);
        (0..a.rows()).map(|i| acc.row_product(a, b, i)).collect()
    } else {
        let per = a.rows().div_ceil(threads);
        let blocks: Vec<Vec<(Vec<usize>, Vec<f64>)>> = parallel::par_map(threads, threads, |t| {
            let mut acc = Accumulator::new(ncols);
            (t * per..((t + 1) * per).min(a.rows()))
                .map(|i| acc.row_product(a, b, i))
                .collect()
        });
        blocks.into_iter().flatten().collect()
    };
    let nnz: usize = rows.iter().map(|r| r.0.len()).sum();
    let mut offsets = Vec::with_capacity(a.rows() + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    offsets.push(0);
    for (c, v) in rows {
        cols.extend(c);
        vals.extend(v);
        offsets.push(cols.len());
    }
    Ok(SparseMatrixCSR::from_raw_unchecked(a.rows(), ncols, offsets, cols, vals))
}

struct Accumulator {
    dense: Vec<f64>,
    marked: Vec<bool>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            dense: vec![0.0; n],
            marked: vec![false; n],
            touched: Vec::new(),
        }
    }

    fn row_product(&mut self, a: &SparseMatrixCSR, b: &SparseMatrixCSR, i: usize) -> (Vec<usize>, Vec<f64>) {
        let (acols, avals) = a.row(i);
        for (k, av) in acols.iter().zip(avals) {
            let (bcols, bvals) = b.row(*k);
            for (j, bv) in bcols.iter().zip(bvals) {
                if !self.marked[*j] {
                    self.marked[*j] = true;
                    self.touched.push(*j);
                }
                self.dense[*j] += av * bv;
            }
        }
        self.touched.sort_unstable();
        let cols = std::mem::take(&mut self.touched);
        let vals = cols
            .iter()
            .map(|&j| {
                let v = self.dense[j];
                self.dense[j] = 0.0;
                self.marked[j] = false;
                v
            })
            .collect();
        (cols, vals)
    }
}

/// Sparse × dense.
pub fn sparse_dense_matmat(a: &SparseMatrixCSR, b: &DenseMatrix, threads: usize) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return arg_err(format!(
            "matmat: {}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let n = b.cols();
    let mut out = DenseMatrix::zeros(a.rows(), n);
    parallel::par_rows(threads, out.data_mut(), n, |i, row| {
        let (cols, vals) = a.row(i);
        for (k, v) in cols.iter().zip(vals) {
            for (o, bv) in row.iter_mut().zip(b.row(*k)) {
                *o += v * bv;
            }
        }
    });
    Ok(out)
}

/// `A + λI`; rows missing a diagonal entry gain one.
pub fn matrix_shift(a: &SparseMatrixCSR, lambda: f64) -> Result<SparseMatrixCSR> {
    if a.rows() != a.cols() {
        return arg_err(format!("shift needs a square matrix, got {}x{}", a.rows(), a.cols()));
    }
    let n = a.rows();
    let has_all_diag = (0..n).all(|i| a.row(i).0.binary_search(&i).is_ok());
    if has_all_diag {
        let mut out = a.clone();
        let offsets = out.row_offsets().to_vec();
        let cols = out.col_indices().to_vec();
        let vals = out.values_mut();
        for i in 0..n {
            let k = offsets[i] + cols[offsets[i]..offsets[i + 1]].binary_search(&i).unwrap();
            vals[k] += lambda;
        }
        return Ok(out);
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz() + n);
    let mut vals = Vec::with_capacity(a.nnz() + n);
    offsets.push(0);
    for i in 0..n {
        let (cs, vs) = a.row(i);
        let mut placed = false;
        for (j, v) in cs.iter().zip(vs) {
            if !placed && *j >= i {
                if *j == i {
                    cols.push(i);
                    vals.push(v + lambda);
                    placed = true;
                    continue;
                }
                cols.push(i);
                vals.push(lambda);
                placed = true;
            }
            cols.push(*j);
            vals.push(*v);
        }
        if !placed {
            cols.push(i);
            vals.push(lambda);
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrixCSR::from_raw_unchecked(n, n, offsets, cols, vals))
}
