//! Column, row and corner segments of triangular and symmetric matrices.
//!
//! The closed-form covariance blocks are all built from a small vocabulary
//! of slices. Everything here is 0-based:
//!
//! * `col_tail_*(x, col, from_row)`: entries `(from_row.., col)`;
//! * `col_head_*(x, col, len)`: entries `(..len, col)`;
//! * `row_tail_lower(a, row, from_col)`: entries `(row, from_col..)`;
//! * `leading_*(x, n)`: leading principal submatrix of order `n`;
//! * `trailing_lower(a, m)`: submatrix after dropping the first `m`
//!   rows and columns;
//! * `corner_*(x, row0, col0)`: lower-right block `(row0.., col0..)`;
//! * `selector(n, z)`: the `(n - z) x n` matrix whose first `z` columns
//!   are zero and whose remaining columns form the identity;
//! * `unit(n, pos)`: length-`n` unit vector.

use crate::linalg::{LowerTriangular, Matrix, SymMatrix, UpperTriangular};

pub fn col_tail_lower(a: &LowerTriangular, col: usize, from_row: usize) -> Vec<f64> {
    (from_row..a.dim()).map(|r| a[(r, col)]).collect()
}

pub fn col_tail_sym(s: &SymMatrix, col: usize, from_row: usize) -> Vec<f64> {
    (from_row..s.dim()).map(|r| s[(r, col)]).collect()
}

pub fn col_head_lower(a: &LowerTriangular, col: usize, len: usize) -> Vec<f64> {
    (0..len).map(|r| a[(r, col)]).collect()
}

pub fn col_head_upper(b: &UpperTriangular, col: usize, len: usize) -> Vec<f64> {
    (0..len).map(|r| b[(r, col)]).collect()
}

pub fn row_tail_lower(a: &LowerTriangular, row: usize, from_col: usize) -> Vec<f64> {
    (from_col..a.dim()).map(|c| a[(row, c)]).collect()
}

pub fn leading_lower(a: &LowerTriangular, n: usize) -> Matrix {
    a.to_matrix().block(0, 0, n, n)
}

pub fn leading_upper(b: &UpperTriangular, n: usize) -> Matrix {
    b.to_matrix().block(0, 0, n, n)
}

pub fn trailing_lower(a: &LowerTriangular, m: usize) -> Matrix {
    let p = a.dim();
    a.to_matrix().block(m, m, p - m, p - m)
}

pub fn corner_lower(a: &LowerTriangular, row0: usize, col0: usize) -> Matrix {
    let p = a.dim();
    a.to_matrix().block(row0, col0, p - row0, p - col0)
}

pub fn corner_sym(s: &SymMatrix, row0: usize, col0: usize) -> Matrix {
    let p = s.dim();
    s.to_matrix().block(row0, col0, p - row0, p - col0)
}

pub fn selector(n: usize, zero_cols: usize) -> Matrix {
    let mut m = Matrix::zeros(n - zero_cols, n);
    for i in 0..(n - zero_cols) {
        m[(i, zero_cols + i)] = 1.0;
    }
    m
}

pub fn unit(n: usize, pos: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[pos] = 1.0;
    v
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `M v` for a dense matrix and a vector of matching length.
pub fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols(), v.len());
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// `v^T M` for a vector and a dense matrix of matching height.
pub fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    assert_eq!(m.rows(), v.len());
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| v[i] * m[(i, j)]).sum())
        .collect()
}
