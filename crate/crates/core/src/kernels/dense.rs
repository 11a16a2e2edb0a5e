//! Conversions between row lists and `nalgebra` matrices, plus sub-matrix helpers.

use nalgebra::{DMatrix, DVector};

pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `m[rows, cols]`.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `m[rows, cols] * 1`.
pub fn block_row_sums(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| cols.iter().map(|&j| m[(rows[i], j)]).sum())
}
