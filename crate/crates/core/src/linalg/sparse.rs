use super::{DenseMatrix, LinearOperator};
use crate::error::{DfpiError, Result};

/// Compressed-row real matrix with strictly ascending column indices per row.
///
/// Explicit zeros are allowed; the incomplete factorizations treat every stored
/// position as part of the sparsity pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(DfpiError::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(DfpiError::InvalidMatrix(
                "row_offsets must span the index array".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(DfpiError::InvalidMatrix(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if end < start {
                return Err(DfpiError::InvalidMatrix(format!(
                    "row_offsets decrease at row {i}"
                )));
            }
            let idx = &col_indices[start..end];
            if idx.iter().any(|&j| j >= cols) {
                return Err(DfpiError::InvalidMatrix(format!(
                    "column index out of range in row {i}"
                )));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DfpiError::InvalidMatrix(format!(
                    "column indices not strictly ascending in row {i}"
                )));
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(DfpiError::NonFinite);
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(DfpiError::InvalidMatrix(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
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
                continue;
            }
            col_indices.push(j);
            values.push(v);
            row_offsets[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    /// Compresses a dense matrix, keeping only nonzero entries.
    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.rows(), a.cols(), &triplets).expect("dense matrix is valid")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Stored value at `(i, j)`, or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (j, v) in idx.iter().zip(vals) {
                triplets.push((*j, i, *v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets).expect("transpose of a valid matrix")
    }

    /// Row sums `A·1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (idx, vals) = self.row(i);
            *yi = idx.iter().zip(vals).map(|(j, v)| v * x[*j]).sum();
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            let (idx, vals) = self.row(i);
            for (j, v) in idx.iter().zip(vals) {
                y[*j] += v * xi;
            }
        }
    }

    fn symmetry_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let norm = super::norm2(&self.values);
        if norm == 0.0 {
            return 0.0;
        }
        let mut triplets = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (j, v) in idx.iter().zip(vals) {
                triplets.push((i, *j, *v));
                triplets.push((*j, i, -*v));
            }
        }
        let diff = SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
            .expect("indices come from a valid matrix");
        super::norm2(&diff.values) / norm
    }

    fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (j, v) in idx.iter().zip(vals) {
                d[(i, *j)] = *v;
            }
        }
        d
    }
}
