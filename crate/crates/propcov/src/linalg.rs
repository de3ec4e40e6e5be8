//! Minimal dense linear algebra for small covariance problems.
//!
//! Row-major storage throughout. Dimensions stay small (tens, not
//! thousands), so everything is plain `O(p^3)` loops with no blocking,
//! pivoting beyond Cholesky, or external backends.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative pivot threshold for positive-definiteness detection.
const PD_PIVOT_RTOL: f64 = 1e-12;
/// Relative asymmetry tolerated (and silently symmetrized away) on input.
const SYM_RTOL: f64 = 1e-9;

/// General dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from nested rows. Panics on ragged input; intended for
    /// literals in tests and small fixed tables.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    /// Outer product `u v^T`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                m[(i, j)] = ui * vj;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= s;
        }
        out
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Copies `block` into `self` with upper-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Matrix {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols);
        let mut out = Matrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix. Construction symmetrizes round-off level asymmetry
/// and rejects anything worse, so stored entries satisfy
/// `m[(i,j)] == m[(j,i)]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Validates symmetry against `1e-9` times the largest entry, then
    /// stores `(M + M^T)/2`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let scale = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut max_asymmetry = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asymmetry = max_asymmetry.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if max_asymmetry > SYM_RTOL * scale {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        let mut sym = data;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (sym[i * dim + j] + sym[j * dim + i]);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, data: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows);
        Self::new(m.rows(), m.data)
    }

    /// Builds from a function of the lower-triangular index pair `(i, j)`,
    /// `i >= j`; the upper part is mirrored, so symmetry is exact.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self::from_lower_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.to_matrix().to_nested()
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

/// Lower-triangular matrix; entries strictly above the diagonal are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    /// Builds from a function of `(i, j)` with `i >= j`; the strict upper
    /// part is zeroed.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                data[i * dim + j] = f(i, j);
            }
        }
        Self { dim, data }
    }

    /// Validates that the strict upper triangle of `rows` is exactly zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows);
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                got: m.cols(),
            });
        }
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if m[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "nonzero entry above the diagonal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(m.rows(), |i, j| m[(i, j)]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_positive_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self[(i, i)] > 0.0)
    }

    pub fn transpose(&self) -> UpperTriangular {
        UpperTriangular::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

impl Index<(usize, usize)> for LowerTriangular {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

/// Upper-triangular matrix; entries strictly below the diagonal are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    /// Builds from a function of `(i, j)` with `i <= j`; the strict lower
    /// part is zeroed.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                data[i * dim + j] = f(i, j);
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows);
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                got: m.cols(),
            });
        }
        for i in 0..m.rows() {
            for j in 0..i {
                if m[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "nonzero entry below the diagonal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(m.rows(), |i, j| m[(i, j)]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_positive_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self[(i, i)] > 0.0)
    }

    pub fn transpose(&self) -> LowerTriangular {
        LowerTriangular::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

impl Index<(usize, usize)> for UpperTriangular {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

/// Cholesky factorization `M = L L^T` with `L` lower triangular and
/// positive diagonal.
///
/// A pivot at or below `1e-12` times the largest diagonal entry of `M`
/// reports `NotPositiveDefinite`.
pub fn cholesky_lower(m: &SymMatrix) -> Result<LowerTriangular> {
    let p = m.dim();
    let max_diag = (0..p).fold(0.0f64, |acc, i| acc.max(m[(i, i)].abs()));
    let threshold = PD_PIVOT_RTOL * max_diag;
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= threshold {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(LowerTriangular { dim: p, data: l })
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn invert_lower_triangular(l: &LowerTriangular) -> Result<LowerTriangular> {
    let p = l.dim();
    let max_diag = (0..p).fold(0.0f64, |acc, i| acc.max(l[(i, i)].abs()));
    for i in 0..p {
        if l[(i, i)].abs() <= 1e-15 * max_diag.max(1.0) {
            return Err(Error::SingularMatrix);
        }
    }
    let mut inv = vec![0.0f64; p * p];
    for j in 0..p {
        inv[j * p + j] = 1.0 / l[(j, j)];
        for i in (j + 1)..p {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[k * p + j];
            }
            inv[i * p + j] = -s / l[(i, i)];
        }
    }
    Ok(LowerTriangular { dim: p, data: inv })
}

/// Inverse of a positive definite matrix via its Cholesky factor:
/// `M^{-1} = (L^{-1})^T L^{-1}`. The result is exactly symmetric.
pub fn sym_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky_lower(m)?;
    let w = invert_lower_triangular(&l)?;
    let p = m.dim();
    // (W^T W)[i][j] = sum_k w[k][i] * w[k][j], k >= max(i, j)
    Ok(SymMatrix::from_lower_fn(p, |i, j| {
        (i..p).map(|k| w[(k, i)] * w[(k, j)]).sum()
    }))
}

/// `tr(M N)` for symmetric `M`, `N` of equal dimension.
pub fn trace_of_product(m: &SymMatrix, n: &SymMatrix) -> Result<f64> {
    if m.dim() != n.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: n.dim(),
        });
    }
    let p = m.dim();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            acc += m[(i, j)] * n[(j, i)];
        }
    }
    Ok(acc)
}

/// Log-determinant of a positive definite matrix via Cholesky.
pub fn sym_log_det(m: &SymMatrix) -> Result<f64> {
    let l = cholesky_lower(m)?;
    Ok((0..m.dim()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}
