//! Domain data shared by every other module: sampled signals, dense and
//! compressed-sparse-row matrices, and ordered curve samples.

use crate::error::{arg_err, Error, Result};

/// A 2D coordinate.
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// Regular `side × side` grid over the unit square.
    Grid { side: usize },
    /// Points sampled along a curve.
    Curve,
}

/// Sampled function values over a discrete domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    points: Vec<Point2>,
    values: Vec<f64>,
    kind: DomainKind,
}

impl Signal {
    pub fn new(points: Vec<Point2>, values: Vec<f64>, kind: DomainKind) -> Result<Self> {
        if points.len() != values.len() {
            return arg_err(format!(
                "signal has {} points but {} values",
                points.len(),
                values.len()
            ));
        }
        if let DomainKind::Grid { side } = kind {
            if side * side != points.len() {
                return arg_err(format!(
                    "grid signal of side {side} needs {} samples, got {}",
                    side * side,
                    points.len()
                ));
            }
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return arg_err("signal coordinates must be finite");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg_err("signal values must be finite");
        }
        Ok(Self {
            points,
            values,
            kind,
        })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same domain, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), values, self.kind)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return arg_err(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return arg_err("matrix entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return arg_err("ragged rows");
        }
        Self::from_vec(rows.len(), ncols, rows.concat())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, v) in col.iter().enumerate() {
            self.set(i, j, *v);
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrixCSR {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrixCSR {
    /// Builds from raw CSR arrays, checking every structural invariant.
    pub fn from_raw(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Internal constructor for kernels that produce canonical output by construction.
    pub(crate) fn from_raw_unchecked(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
        m
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return arg_err(format!("triplet ({i},{j}) outside {rows}x{cols}"));
            }
            if !v.is_finite() {
                return arg_err("sparse values must be finite");
            }
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::from_raw(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw_unchecked(rows, cols, vec![0; rows + 1], Vec::new(), Vec::new())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_raw_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(a.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..a.rows() {
            for (j, &v) in a.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::from_raw_unchecked(a.rows(), a.cols(), row_offsets, col_indices, values)
    }

    /// Checks the CSR invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(format!("invalid CSR: {msg}")));
        if self.row_offsets.len() != self.rows + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.rows + 1
            ));
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len()
        {
            return bad("row_offsets must start at 0 and end at nnz".into());
        }
        if self.col_indices.len() != self.values.len() {
            return bad("col_indices and values differ in length".into());
        }
        for i in 0..self.rows {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if s > e {
                return bad(format!("row_offsets decrease at row {i}"));
            }
            let cols = &self.col_indices[s..e];
            if cols.iter().any(|&j| j >= self.cols) {
                return bad(format!("column index out of range in row {i}"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns not strictly increasing in row {i}"));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Stored value at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                d.set(i, *j, *v);
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Ordered samples along a (possibly closed) planar curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoints {
    points: Vec<Point2>,
    closed: bool,
}

impl CurvePoints {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self> {
        if points.len() < 4 {
            return arg_err(format!("a curve needs at least 4 points, got {}", points.len()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return arg_err("curve coordinates must be finite");
        }
        let n = points.len();
        let pairs = if closed { n } else { n - 1 };
        for i in 0..pairs {
            if points[i] == points[(i + 1) % n] {
                return arg_err(format!("consecutive curve points {i} and {} coincide", (i + 1) % n));
            }
        }
        Ok(Self { points, closed })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
