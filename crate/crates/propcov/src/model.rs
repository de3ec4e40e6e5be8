//! Parameter containers for the proportional covariance model and the
//! half-vectorization layouts used by the asymptotic covariance matrices.
//!
//! The model ties `K` group covariance matrices to a common matrix through
//! positive coefficients, `Sigma_k = c_k * Sigma_1` with `c_1 = 1`. Three
//! equivalent parametrizations are carried around:
//!
//! * `(c, B)` where `B` is the upper-triangular Cholesky inverse root,
//!   `Sigma_1^{-1} = B B^T`;
//! * `(c, A)` where `A` is the lower-triangular Cholesky root,
//!   `Sigma_1 = A A^T` and `B^T = A^{-1}`;
//! * `(c, Sigma_1)` with the covariance matrix itself.
//!
//! Parameter vectors put the free coefficients `(c_2, ..., c_K)` first and
//! then the matrix entries column by column: column `i` of `B` contributes
//! `(b_{1i}, ..., b_{ii})`, while column `i` of `A` or of the lower triangle
//! of `Sigma_1` contributes `(a_{ii}, ..., a_{pi})`.

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_lower, invert_lower_triangular, sym_inverse, LowerTriangular, SymMatrix,
    UpperTriangular,
};

/// One group's unbiased covariance estimate together with its degrees of
/// freedom (sample size minus one).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    s: SymMatrix,
    n: usize,
}

impl GroupSample {
    /// Requires `n >= 1` and a positive definite `s`.
    pub fn new(s: SymMatrix, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "degrees of freedom must be at least 1".into(),
            ));
        }
        cholesky_lower(&s)?;
        Ok(Self { s, n })
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.s
    }

    pub fn df(&self) -> usize {
        self.n
    }
}

/// Ordered collection of group samples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    groups: Vec<GroupSample>,
}

impl SampleSet {
    pub fn new(groups: Vec<GroupSample>) -> Result<Self> {
        let Some(first) = groups.first() else {
            return Err(Error::InvalidArgument("need at least one group".into()));
        };
        let p = first.covariance().dim();
        for g in &groups {
            if g.covariance().dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: g.covariance().dim(),
                });
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[GroupSample] {
        &self.groups
    }

    pub fn k_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups[0].covariance().dim()
    }

    /// Total degrees of freedom over all groups.
    pub fn df_total(&self) -> f64 {
        self.groups.iter().map(|g| g.df() as f64).sum()
    }

    /// Degrees-of-freedom weights `r_k = n_k / n_+`; they sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.df_total();
        self.groups.iter().map(|g| g.df() as f64 / total).collect()
    }
}

/// Proportionality coefficients, stored at full length `K` with the first
/// entry pinned to exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidArgument("need at least one group".into()));
        }
        if c[0] != 1.0 {
            return Err(Error::InvalidArgument(
                "reference coefficient must be exactly 1".into(),
            ));
        }
        if c.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "coefficients must be positive and finite".into(),
            ));
        }
        Ok(Self(c))
    }

    pub fn ones(k_groups: usize) -> Self {
        Self(vec![1.0; k_groups])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Never empty; the reference coefficient always exists.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The free part `(c_2, ..., c_K)`.
    pub fn free(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn get(&self, group: usize) -> f64 {
        self.0[group]
    }
}

/// `(c, B)`: coefficients plus the Cholesky inverse root of the common
/// covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholInvParam {
    pub c: Coefficients,
    pub b: UpperTriangular,
}

/// `(c, A)`: coefficients plus the Cholesky root.
#[derive(Debug, Clone, PartialEq)]
pub struct CholRootParam {
    pub c: Coefficients,
    pub a: LowerTriangular,
}

/// `(c, Sigma_1)`: coefficients plus the common covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovParam {
    pub c: Coefficients,
    pub sigma1: SymMatrix,
}

impl CholRootParam {
    pub fn new(c: Coefficients, a: LowerTriangular) -> Result<Self> {
        if !a.has_positive_diagonal() {
            return Err(Error::InvalidArgument(
                "Cholesky root needs a positive diagonal".into(),
            ));
        }
        Ok(Self { c, a })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn to_chol_inv(&self) -> Result<CholInvParam> {
        Ok(CholInvParam {
            c: self.c.clone(),
            b: b_from_a(&self.a)?,
        })
    }

    pub fn to_cov(&self) -> CovParam {
        CovParam {
            c: self.c.clone(),
            sigma1: sigma_from_a(&self.a),
        }
    }

    pub fn from_cov(params: &CovParam) -> Result<Self> {
        Ok(Self {
            c: params.c.clone(),
            a: a_from_sigma(&params.sigma1)?,
        })
    }
}

impl CholInvParam {
    pub fn new(c: Coefficients, b: UpperTriangular) -> Result<Self> {
        if !b.has_positive_diagonal() {
            return Err(Error::InvalidArgument(
                "Cholesky inverse root needs a positive diagonal".into(),
            ));
        }
        Ok(Self { c, b })
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn to_chol_root(&self) -> Result<CholRootParam> {
        Ok(CholRootParam {
            c: self.c.clone(),
            a: a_from_b(&self.b)?,
        })
    }
}

impl CovParam {
    pub fn new(c: Coefficients, sigma1: SymMatrix) -> Result<Self> {
        cholesky_lower(&sigma1)?;
        Ok(Self { c, sigma1 })
    }

    pub fn dim(&self) -> usize {
        self.sigma1.dim()
    }

    /// Covariance matrix of group `k` (0-based), `c_k * Sigma_1`.
    pub fn group_covariance(&self, group: usize) -> SymMatrix {
        self.sigma1.scaled(self.c.get(group))
    }
}

/// `B` with `B^T = A^{-1}`; upper triangular with positive diagonal.
pub fn b_from_a(a: &LowerTriangular) -> Result<UpperTriangular> {
    Ok(invert_lower_triangular(a)?.transpose())
}

/// `A` with `A = (B^T)^{-1}`; inverse map of [`b_from_a`].
pub fn a_from_b(b: &UpperTriangular) -> Result<LowerTriangular> {
    invert_lower_triangular(&b.transpose())
}

/// `Sigma_1 = A A^T`, exactly symmetric by construction.
pub fn sigma_from_a(a: &LowerTriangular) -> SymMatrix {
    SymMatrix::from_lower_fn(a.dim(), |i, j| {
        // rows i and j of A overlap in columns 0..=min(i, j) = 0..=j
        (0..=j).map(|k| a[(i, k)] * a[(j, k)]).sum()
    })
}

/// Cholesky root of `Sigma_1`; inverse map of [`sigma_from_a`].
pub fn a_from_sigma(sigma: &SymMatrix) -> Result<LowerTriangular> {
    cholesky_lower(sigma)
}

/// `Sigma_1^{-1}` of a covariance parameter, via `B B^T`.
pub fn sigma_inv_from_b(b: &UpperTriangular) -> SymMatrix {
    let p = b.dim();
    SymMatrix::from_lower_fn(p, |i, j| {
        // rows i and j of B overlap in columns max(i, j)..p = i..p
        (i..p).map(|k| b[(i, k)] * b[(j, k)]).sum()
    })
}

/// Packs the nonzero entries of `B` column by column: `(b_{1i}, ..., b_{ii})`
/// for `i = 1..p`.
pub fn pack_b(b: &UpperTriangular) -> Vec<f64> {
    let p = b.dim();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for col in 0..p {
        for row in 0..=col {
            out.push(b[(row, col)]);
        }
    }
    out
}

/// Inverse of [`pack_b`].
pub fn unpack_b(dim: usize, packed: &[f64]) -> Result<UpperTriangular> {
    let expected = dim * (dim + 1) / 2;
    if packed.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: packed.len(),
        });
    }
    let mut it = packed.iter();
    let mut b = vec![vec![0.0; dim]; dim];
    for col in 0..dim {
        for row in 0..=col {
            b[row][col] = *it.next().unwrap();
        }
    }
    Ok(UpperTriangular::from_fn(dim, |i, j| b[i][j]))
}

/// Packs the nonzero entries of `A` column by column: `(a_{ii}, ..., a_{pi})`
/// for `i = 1..p`.
pub fn pack_a(a: &LowerTriangular) -> Vec<f64> {
    let p = a.dim();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for col in 0..p {
        for row in col..p {
            out.push(a[(row, col)]);
        }
    }
    out
}

/// Inverse of [`pack_a`].
pub fn unpack_a(dim: usize, packed: &[f64]) -> Result<LowerTriangular> {
    let expected = dim * (dim + 1) / 2;
    if packed.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: packed.len(),
        });
    }
    let mut it = packed.iter();
    let mut a = vec![vec![0.0; dim]; dim];
    for col in 0..dim {
        for row in col..dim {
            a[row][col] = *it.next().unwrap();
        }
    }
    Ok(LowerTriangular::from_fn(dim, |i, j| a[i][j]))
}

/// Packs the lower triangle of a symmetric matrix column by column:
/// `(s_{ii}, ..., s_{pi})` for `i = 1..p`, the same layout as [`pack_a`].
pub fn pack_sigma(sigma: &SymMatrix) -> Vec<f64> {
    let p = sigma.dim();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for col in 0..p {
        for row in col..p {
            out.push(sigma[(row, col)]);
        }
    }
    out
}

/// Inverse of [`pack_sigma`].
pub fn unpack_sigma(dim: usize, packed: &[f64]) -> Result<SymMatrix> {
    let expected = dim * (dim + 1) / 2;
    if packed.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: packed.len(),
        });
    }
    let mut it = packed.iter();
    let mut s = vec![vec![0.0; dim]; dim];
    for col in 0..dim {
        for row in col..dim {
            s[row][col] = *it.next().unwrap();
        }
    }
    Ok(SymMatrix::from_lower_fn(dim, |i, j| s[i][j]))
}

/// Which matrix parameter a vector or covariance refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// `(c, B)`, the Cholesky inverse root.
    CholInv,
    /// `(c, A)`, the Cholesky root.
    CholRoot,
    /// `(c, Sigma_1)`, the covariance matrix itself.
    Cov,
}

/// Descriptor of one position in a packed parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamLabel {
    /// Coefficient of group `group` (0-based, never 0 itself).
    Coefficient { group: usize },
    /// Matrix entry at `(row, col)`, 0-based.
    Entry { row: usize, col: usize },
}

/// Bijection between packed parameter positions and parameter labels for
/// a given group count, dimension and parametrization.
///
/// Total length is `K - 1 + p (p + 1) / 2`: free coefficients first, then
/// the triangular column blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamIndexMap {
    k_groups: usize,
    dim: usize,
    parametrization: Parametrization,
}

impl ParamIndexMap {
    pub fn new(k_groups: usize, dim: usize, parametrization: Parametrization) -> Self {
        assert!(k_groups >= 1 && dim >= 1);
        Self {
            k_groups,
            dim,
            parametrization,
        }
    }

    pub fn k_groups(&self) -> usize {
        self.k_groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parametrization(&self) -> Parametrization {
        self.parametrization
    }

    pub fn len(&self) -> usize {
        self.k_groups - 1 + self.dim * (self.dim + 1) / 2
    }

    /// Never empty; the matrix parameter contributes at least one entry.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of free coefficients, `K - 1`.
    pub fn coeff_len(&self) -> usize {
        self.k_groups - 1
    }

    /// Offset of the matrix block for column `col` within the packed
    /// vector, and that block's length.
    pub fn column_block(&self, col: usize) -> (usize, usize) {
        let p = self.dim;
        assert!(col < p);
        match self.parametrization {
            // block sizes 1, 2, ..., p
            Parametrization::CholInv => (self.coeff_len() + col * (col + 1) / 2, col + 1),
            // block sizes p, p - 1, ..., 1
            Parametrization::CholRoot | Parametrization::Cov => {
                let offset = col * p - col * col.saturating_sub(1) / 2;
                (self.coeff_len() + offset, p - col)
            }
        }
    }

    pub fn position_of_coeff(&self, group: usize) -> usize {
        assert!(group >= 1 && group < self.k_groups);
        group - 1
    }

    pub fn position_of_entry(&self, row: usize, col: usize) -> usize {
        let (offset, _) = self.column_block(col);
        match self.parametrization {
            Parametrization::CholInv => {
                assert!(row <= col);
                offset + row
            }
            Parametrization::CholRoot | Parametrization::Cov => {
                assert!(row >= col && row < self.dim);
                offset + (row - col)
            }
        }
    }

    pub fn label(&self, position: usize) -> ParamLabel {
        assert!(position < self.len());
        if position < self.coeff_len() {
            return ParamLabel::Coefficient {
                group: position + 1,
            };
        }
        let mut rest = position - self.coeff_len();
        for col in 0..self.dim {
            let (_, len) = self.column_block(col);
            if rest < len {
                let row = match self.parametrization {
                    Parametrization::CholInv => rest,
                    Parametrization::CholRoot | Parametrization::Cov => col + rest,
                };
                return ParamLabel::Entry { row, col };
            }
            rest -= len;
        }
        unreachable!("position within len() always falls in a block");
    }

    pub fn labels(&self) -> Vec<ParamLabel> {
        (0..self.len()).map(|pos| self.label(pos)).collect()
    }
}

/// Full parameter vector `(c_2, ..., c_K, packed B)`.
pub fn pack_chol_inv(params: &CholInvParam) -> Vec<f64> {
    let mut out = params.c.free().to_vec();
    out.extend(pack_b(&params.b));
    out
}

/// Inverse of [`pack_chol_inv`].
pub fn unpack_chol_inv(k_groups: usize, dim: usize, packed: &[f64]) -> Result<CholInvParam> {
    let expected = k_groups - 1 + dim * (dim + 1) / 2;
    if packed.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: packed.len(),
        });
    }
    let mut c = vec![1.0];
    c.extend_from_slice(&packed[..k_groups - 1]);
    Ok(CholInvParam {
        c: Coefficients::new(c)?,
        b: unpack_b(dim, &packed[k_groups - 1..])?,
    })
}

/// Full parameter vector `(c_2, ..., c_K, packed A)`.
pub fn pack_chol_root(params: &CholRootParam) -> Vec<f64> {
    let mut out = params.c.free().to_vec();
    out.extend(pack_a(&params.a));
    out
}

/// Full parameter vector `(c_2, ..., c_K, packed Sigma_1)`.
pub fn pack_cov(params: &CovParam) -> Vec<f64> {
    let mut out = params.c.free().to_vec();
    out.extend(pack_sigma(&params.sigma1));
    out
}

/// Consistency helper: `Sigma_k^{-1}` via the inverse-root route,
/// `(1/c_k) B B^T`.
pub fn group_precision(params: &CholInvParam, group: usize) -> SymMatrix {
    sigma_inv_from_b(&params.b).scaled(1.0 / params.c.get(group))
}

/// Consistency helper: `Sigma_k^{-1}` via direct inversion of
/// `c_k * A A^T`.
pub fn group_precision_direct(params: &CholRootParam, group: usize) -> Result<SymMatrix> {
    sym_inverse(&sigma_from_a(&params.a).scaled(params.c.get(group)))
}
