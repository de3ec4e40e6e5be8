//! Closed-form information matrix and asymptotic covariance matrices of the
//! maximum likelihood estimators, in three parametrizations.
//!
//! All matrices here are per unit of total degrees of freedom: they describe
//! the limiting covariance of `sqrt(n_+) (theta_hat - theta)`. Division by
//! `n_+` happens only in [`standard_errors`] and in the Monte Carlo harness.
//!
//! Parameter vectors are packed as described in [`crate::model`]: free
//! coefficients first, then triangular column blocks. Throughout, `r_k`
//! are the degrees-of-freedom weights, `alpha_k = r_k / c_k`, and the two
//! scalars
//!
//! ```text
//! d = (1 - (1 + p) r_1) / (2 p r_1),    e = (1 - r_1) / (2 p r_1)
//! ```
//!
//! measure how much estimating the coefficients inflates the blocks of the
//! common-matrix parameter. In the single-population case `r_1 = 1` they
//! reduce to `d = -1/2`, `e = 0` and the column blocks decouple.

pub mod slices;

use crate::error::{Error, Result};
use crate::linalg::{LowerTriangular, Matrix, SymMatrix, UpperTriangular};
use crate::model::{
    b_from_a, sigma_from_a, CholRootParam, Coefficients, ParamIndexMap, Parametrization,
};
use slices::{col_head_upper, col_tail_lower, col_tail_sym, leading_upper, selector, trailing_lower, unit};

/// Fisher information per unit total degrees of freedom, in the
/// coefficient/inverse-root packing.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    matrix: Matrix,
    index_map: ParamIndexMap,
}

impl InfoMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn index_map(&self) -> &ParamIndexMap {
        &self.index_map
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// Asymptotic covariance of `sqrt(n_+) (theta_hat - theta)` in one of the
/// three parametrizations.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCov {
    matrix: Matrix,
    index_map: ParamIndexMap,
}

impl AsymptoticCov {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn index_map(&self) -> &ParamIndexMap {
        &self.index_map
    }

    pub fn parametrization(&self) -> Parametrization {
        self.index_map.parametrization()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("need at least one weight".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "weights must sum to one, got {sum}"
        )));
    }
    Ok(())
}

fn validate_group_count(weights: &[f64], c: &Coefficients) -> Result<()> {
    if weights.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// Inflation scalars `(d, e)` for a reference-group weight `r_1`.
pub fn inflation_coefficients(dim: usize, r1: f64) -> (f64, f64) {
    let p = dim as f64;
    let d = (1.0 - (1.0 + p) * r1) / (2.0 * p * r1);
    let e = (1.0 - r1) / (2.0 * p * r1);
    (d, e)
}

/// Fisher information for the coefficients and the inverse root, per unit
/// total degrees of freedom.
///
/// The coefficient block is `(p/2) diag(r_k / c_k^2)`; the cross block
/// couples each coefficient only to the diagonal entry of each column
/// block, with value `-a_ii alpha_k`; the inverse-root block is block
/// diagonal with `i`-th block `a_ii^2 e_i e_i^T + A_i A_i^T`, `A_i` the
/// leading principal submatrix of the root of order `i + 1`.
pub fn information_cb(params: &CholRootParam, weights: &[f64]) -> Result<InfoMatrix> {
    validate_weights(weights)?;
    validate_group_count(weights, &params.c)?;
    let k = params.c.len();
    let p = params.dim();
    let index_map = ParamIndexMap::new(k, p, Parametrization::CholInv);
    let mut info = Matrix::zeros(index_map.len(), index_map.len());
    let a = &params.a;
    let p_f = p as f64;

    for g in 1..k {
        let cg = params.c.get(g);
        let pos = index_map.position_of_coeff(g);
        info[(pos, pos)] = 0.5 * p_f * weights[g] / (cg * cg);
    }

    for col in 0..p {
        let diag_pos = index_map.position_of_entry(col, col);
        for g in 1..k {
            let alpha = weights[g] / params.c.get(g);
            let v = -a[(col, col)] * alpha;
            let gpos = index_map.position_of_coeff(g);
            info[(gpos, diag_pos)] = v;
            info[(diag_pos, gpos)] = v;
        }
        let (offset, len) = index_map.column_block(col);
        for r in 0..len {
            for s in 0..len {
                // (A_i A_i^T)[r][s]; rows r and s of the root overlap only
                // up to the smaller index
                let mut v = (0..=r.min(s)).map(|m| a[(r, m)] * a[(s, m)]).sum::<f64>();
                if r == col && s == col {
                    v += a[(col, col)] * a[(col, col)];
                }
                info[(offset + r, offset + s)] = v;
            }
        }
    }

    Ok(InfoMatrix {
        matrix: info,
        index_map,
    })
}

/// Closed-form inverse of one diagonal block of the inverse-root part of
/// the information matrix: `B_i B_i^T - (1/2) b_i b_i^T` with `B_i` the
/// leading principal submatrix of the inverse root and `b_i` the head of
/// its column `col`.
pub fn i22_block_inverse(a: &LowerTriangular, col: usize) -> Result<SymMatrix> {
    let p = a.dim();
    if col >= p {
        return Err(Error::InvalidArgument(format!(
            "column {col} out of range for dimension {p}"
        )));
    }
    let b = b_from_a(a)?;
    let lead = leading_upper(&b, col + 1);
    let head = col_head_upper(&b, col, col + 1);
    let n = col + 1;
    Ok(SymMatrix::from_lower_fn(n, |r, s| {
        let bb: f64 = (0..n).map(|m| lead[(r, m)] * lead[(s, m)]).sum();
        bb - 0.5 * head[r] * head[s]
    }))
}

/// Precision of the coefficient estimates after profiling out the common
/// matrix: `(p/2) { diag(r_k / c_k^2) - alpha alpha^T }` over the free
/// groups. Equals the Schur complement of the inverse-root block in the
/// full information matrix.
pub fn u11(c: &Coefficients, weights: &[f64], dim: usize) -> Result<Matrix> {
    validate_weights(weights)?;
    validate_group_count(weights, c)?;
    let k = c.len();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let p = dim as f64;
    let alpha: Vec<f64> = (1..k).map(|g| weights[g] / c.get(g)).collect();
    let mut m = Matrix::outer(&alpha, &alpha).scaled(-1.0);
    for g in 1..k {
        let cg = c.get(g);
        m[(g - 1, g - 1)] += weights[g] / (cg * cg);
    }
    Ok(m.scaled(0.5 * p))
}

/// Asymptotic covariance of the free coefficient estimates:
/// `(2/p) { diag(c_k^2 / r_k) + (1/r_1) c c^T }`. Free of the common
/// matrix entirely.
pub fn v11(c: &Coefficients, weights: &[f64], dim: usize) -> Result<Matrix> {
    validate_weights(weights)?;
    validate_group_count(weights, c)?;
    let k = c.len();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let p = dim as f64;
    let free = c.free();
    let mut m = Matrix::outer(free, free).scaled(1.0 / weights[0]);
    for g in 1..k {
        let cg = c.get(g);
        m[(g - 1, g - 1)] += cg * cg / weights[g];
    }
    Ok(m.scaled(2.0 / p))
}

/// Cross covariance of the coefficient and inverse-root estimates; the
/// block for column `i` is `(1 / (p r_1)) c b_i^T` with `b_i` the head of
/// inverse-root column `i`.
pub fn v12_cb(c: &Coefficients, b: &UpperTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    validate_group_count(weights, c)?;
    let k = c.len();
    let p = b.dim();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let q2 = p * (p + 1) / 2;
    let map = ParamIndexMap::new(1, p, Parametrization::CholInv);
    let scale = 1.0 / (p as f64 * weights[0]);
    let mut m = Matrix::zeros(k - 1, q2);
    for col in 0..p {
        let (offset, len) = map.column_block(col);
        let head = col_head_upper(b, col, len);
        for g in 0..(k - 1) {
            for (j, h) in head.iter().enumerate() {
                m[(g, offset + j)] = scale * c.free()[g] * h;
            }
        }
    }
    Ok(m)
}

/// Covariance of the inverse-root estimates. Diagonal blocks are
/// `B_i B_i^T + d b_i b_i^T`, off-diagonal blocks `e b_i b_j^T`.
pub fn v22_cb(b: &UpperTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    let p = b.dim();
    let (d, e) = inflation_coefficients(p, weights[0]);
    let map = ParamIndexMap::new(1, p, Parametrization::CholInv);
    let q2 = p * (p + 1) / 2;
    let mut m = Matrix::zeros(q2, q2);
    for i in 0..p {
        let (oi, li) = map.column_block(i);
        let head_i = col_head_upper(b, i, li);
        for j in 0..p {
            let (oj, lj) = map.column_block(j);
            if i == j {
                let lead = leading_upper(b, li);
                for r in 0..li {
                    for s in 0..li {
                        let bb: f64 = (0..li).map(|mm| lead[(r, mm)] * lead[(s, mm)]).sum();
                        m[(oi + r, oi + s)] = bb + d * head_i[r] * head_i[s];
                    }
                }
            } else {
                let head_j = col_head_upper(b, j, lj);
                for r in 0..li {
                    for s in 0..lj {
                        m[(oi + r, oj + s)] = e * head_i[r] * head_j[s];
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Jacobian of the root entries with respect to the inverse-root entries.
///
/// The entry pairing `a_{ji}` (packed row) with `b_{hg}` (packed column)
/// is `-a_{jg} a_{hi}` when `i <= h <= g <= j` and zero otherwise, which
/// makes the matrix block upper triangular in the column-block order.
pub fn jacobian_a_wrt_b(a: &LowerTriangular) -> Matrix {
    let p = a.dim();
    let rows = ParamIndexMap::new(1, p, Parametrization::CholRoot);
    let cols = ParamIndexMap::new(1, p, Parametrization::CholInv);
    let q2 = p * (p + 1) / 2;
    let mut jac = Matrix::zeros(q2, q2);
    for i in 0..p {
        for j in i..p {
            let row = rows.position_of_entry(j, i);
            for g in 0..p {
                for h in 0..=g {
                    let col = cols.position_of_entry(h, g);
                    if i <= h && g <= j {
                        jac[(row, col)] = -a[(j, g)] * a[(h, i)];
                    }
                }
            }
        }
    }
    jac
}

/// Cross covariance of the coefficient and root estimates; the block for
/// column `i` is `-(1 / (p r_1)) c a_i^T` with `a_i` the tail of root
/// column `i`.
pub fn v12_ca(c: &Coefficients, a: &LowerTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    validate_group_count(weights, c)?;
    let k = c.len();
    let p = a.dim();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let map = ParamIndexMap::new(1, p, Parametrization::CholRoot);
    let scale = -1.0 / (p as f64 * weights[0]);
    let mut m = Matrix::zeros(k - 1, p * (p + 1) / 2);
    for col in 0..p {
        let (offset, len) = map.column_block(col);
        let tail = col_tail_lower(a, col, col);
        debug_assert_eq!(tail.len(), len);
        for g in 0..(k - 1) {
            for (j, t) in tail.iter().enumerate() {
                m[(g, offset + j)] = scale * c.free()[g] * t;
            }
        }
    }
    Ok(m)
}

/// Covariance of the root estimates. Diagonal blocks are
/// `A_{-i} A_{-i}^T + d a_i a_i^T` with `A_{-i}` the trailing submatrix
/// of the root; off-diagonal blocks are `e a_i a_j^T`.
///
/// The last diagonal block reduces to `(1 + d) a_pp^2` because the
/// trailing submatrix there is the scalar `a_pp`; the general pattern is
/// used unconditionally.
pub fn v22_ca(a: &LowerTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    let p = a.dim();
    let (d, e) = inflation_coefficients(p, weights[0]);
    let map = ParamIndexMap::new(1, p, Parametrization::CholRoot);
    let q2 = p * (p + 1) / 2;
    let mut m = Matrix::zeros(q2, q2);
    for i in 0..p {
        let (oi, li) = map.column_block(i);
        let tail_i = col_tail_lower(a, i, i);
        for j in 0..p {
            let (oj, lj) = map.column_block(j);
            if i == j {
                let trail = trailing_lower(a, i);
                for r in 0..li {
                    for s in 0..li {
                        let aa: f64 = (0..li).map(|mm| trail[(r, mm)] * trail[(s, mm)]).sum();
                        m[(oi + r, oi + s)] = aa + d * tail_i[r] * tail_i[s];
                    }
                }
            } else {
                let tail_j = col_tail_lower(a, j, j);
                for r in 0..li {
                    for s in 0..lj {
                        m[(oi + r, oj + s)] = e * tail_i[r] * tail_j[s];
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Jacobian of the lower triangle of the covariance matrix with respect to
/// the root entries.
///
/// The block pairing covariance column `i` with root column `j <= i` is
/// `a_{ij} S + t u^T`, where `S` selects the last `p - i` coordinates of a
/// length `p - j` vector, `t` is the tail of root column `j` from row `i`
/// on, and `u` is the unit vector at position `i - j`. Blocks with
/// `j > i` vanish, so the matrix is block lower triangular.
pub fn jacobian_sigma_wrt_a(a: &LowerTriangular) -> Matrix {
    let p = a.dim();
    let rows = ParamIndexMap::new(1, p, Parametrization::Cov);
    let cols = ParamIndexMap::new(1, p, Parametrization::CholRoot);
    let q2 = p * (p + 1) / 2;
    let mut jac = Matrix::zeros(q2, q2);
    for bi in 0..p {
        let (ro, rl) = rows.column_block(bi);
        for bj in 0..=bi {
            let (co, cl) = cols.column_block(bj);
            let sel = selector(p - bj, bi - bj);
            let tail = col_tail_lower(a, bj, bi);
            let u = unit(p - bj, bi - bj);
            debug_assert_eq!((sel.rows(), sel.cols()), (rl, cl));
            debug_assert_eq!(tail.len(), rl);
            for r in 0..rl {
                for s in 0..cl {
                    jac[(ro + r, co + s)] = a[(bi, bj)] * sel[(r, s)] + tail[r] * u[s];
                }
            }
        }
    }
    jac
}

/// Cross covariance of the coefficient and covariance-matrix estimates;
/// the block for column `i` is `-(2 / (p r_1)) c s_i^T` with `s_i` the
/// lower tail of covariance column `i`.
///
/// The covariance matrix is derived from the root so that all slices come
/// from one source.
pub fn v12_csigma(c: &Coefficients, a: &LowerTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    validate_group_count(weights, c)?;
    let k = c.len();
    let p = a.dim();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let sigma = sigma_from_a(a);
    let map = ParamIndexMap::new(1, p, Parametrization::Cov);
    let scale = -2.0 / (p as f64 * weights[0]);
    let mut m = Matrix::zeros(k - 1, p * (p + 1) / 2);
    for col in 0..p {
        let (offset, len) = map.column_block(col);
        let tail = col_tail_sym(&sigma, col, col);
        debug_assert_eq!(tail.len(), len);
        for g in 0..(k - 1) {
            for (j, t) in tail.iter().enumerate() {
                m[(g, offset + j)] = scale * c.free()[g] * t;
            }
        }
    }
    Ok(m)
}

/// Covariance of the covariance-matrix estimates. The block pairing
/// columns `i <= j` is
///
/// ```text
/// sigma_ij * C_ij + 4 e s_i s_j^T + t_ji t_ij^T
/// ```
///
/// where `C_ij` is the lower-right corner of the covariance matrix
/// starting at `(i, j)`, `s_i` is the lower tail of column `i`, and
/// `t_ji` is the tail of column `j` from row `i` on. On the diagonal the
/// two rank-one terms merge into `(4 e + 1) s_i s_i^T`.
pub fn v22_csigma(a: &LowerTriangular, weights: &[f64]) -> Result<Matrix> {
    validate_weights(weights)?;
    let p = a.dim();
    let sigma = sigma_from_a(a);
    let (_, e) = inflation_coefficients(p, weights[0]);
    let map = ParamIndexMap::new(1, p, Parametrization::Cov);
    let q2 = p * (p + 1) / 2;
    let mut m = Matrix::zeros(q2, q2);
    for bi in 0..p {
        let (oi, li) = map.column_block(bi);
        for bj in bi..p {
            let (oj, lj) = map.column_block(bj);
            let corner = slices::corner_sym(&sigma, bi, bj);
            let s_i = col_tail_sym(&sigma, bi, bi);
            let s_j = col_tail_sym(&sigma, bj, bj);
            let t_ji = col_tail_sym(&sigma, bj, bi);
            let t_ij = col_tail_sym(&sigma, bi, bj);
            for r in 0..li {
                for s in 0..lj {
                    let v = sigma[(bi, bj)] * corner[(r, s)]
                        + 4.0 * e * s_i[r] * s_j[s]
                        + t_ji[r] * t_ij[s];
                    m[(oi + r, oj + s)] = v;
                    m[(oj + s, oi + r)] = v;
                }
            }
        }
    }
    Ok(m)
}

/// Assembles the full asymptotic covariance matrix in the requested
/// parametrization, coefficient block first.
///
/// With a single group there is no coefficient block and the result is
/// just the matrix-parameter block. Fails with `NotPositiveSemidefinite`
/// if any diagonal entry is below `-1e-10`.
pub fn assemble_v(
    params: &CholRootParam,
    weights: &[f64],
    parametrization: Parametrization,
) -> Result<AsymptoticCov> {
    validate_weights(weights)?;
    validate_group_count(weights, &params.c)?;
    let k = params.c.len();
    let p = params.dim();
    let index_map = ParamIndexMap::new(k, p, parametrization);
    let q = index_map.len();
    let mut m = Matrix::zeros(q, q);

    let v22 = match parametrization {
        Parametrization::CholInv => v22_cb(&b_from_a(&params.a)?, weights)?,
        Parametrization::CholRoot => v22_ca(&params.a, weights)?,
        Parametrization::Cov => v22_csigma(&params.a, weights)?,
    };
    m.set_block(k - 1, k - 1, &v22);

    if k >= 2 {
        let coeff_block = v11(&params.c, weights, p)?;
        m.set_block(0, 0, &coeff_block);
        let cross = match parametrization {
            Parametrization::CholInv => v12_cb(&params.c, &b_from_a(&params.a)?, weights)?,
            Parametrization::CholRoot => v12_ca(&params.c, &params.a, weights)?,
            Parametrization::Cov => v12_csigma(&params.c, &params.a, weights)?,
        };
        m.set_block(0, k - 1, &cross);
        m.set_block(k - 1, 0, &cross.transpose());
    }

    for i in 0..q {
        if m[(i, i)] < -1e-10 {
            return Err(Error::NotPositiveSemidefinite(m[(i, i)]));
        }
    }
    Ok(AsymptoticCov {
        matrix: m,
        index_map,
    })
}

/// Plug-in standard errors `sqrt(diag(V) / n_+)`.
pub fn standard_errors(v: &AsymptoticCov, n_plus: f64) -> Vec<f64> {
    (0..v.dim())
        .map(|i| (v.matrix[(i, i)].max(0.0) / n_plus).sqrt())
        .collect()
}

/// Delta-method transport: conjugates a packed covariance by the Jacobian
/// of the matrix-parameter map, leaving the coefficient block alone.
pub fn conjugate_by_jacobian(v: &Matrix, jac: &Matrix, coeff_len: usize) -> Result<Matrix> {
    let q = v.rows();
    let q2 = jac.rows();
    if coeff_len + q2 != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: coeff_len + q2,
        });
    }
    let mut full = Matrix::identity(q);
    full.set_block(coeff_len, coeff_len, jac);
    full.mul(v)?.mul(&full.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_inverse;
    use crate::model::{pack_b, pack_chol_root};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_root(p: usize, rng: &mut ChaCha8Rng) -> LowerTriangular {
        LowerTriangular::from_fn(p, |i, j| {
            if i == j {
                rng.gen_range(0.85..1.4)
            } else {
                rng.gen_range(-0.35..0.35)
            }
        })
    }

    pub(crate) fn random_instance(
        p: usize,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> (CholRootParam, Vec<f64>) {
        let a = random_root(p, rng);
        let mut c = vec![1.0];
        for _ in 1..k {
            c.push(rng.gen_range(0.8..1.8));
        }
        let dfs: Vec<f64> = (0..k).map(|_| rng.gen_range(80.0..160.0)).collect();
        let total: f64 = dfs.iter().sum();
        let weights = dfs.iter().map(|n| n / total).collect();
        (
            CholRootParam::new(Coefficients::new(c).unwrap(), a).unwrap(),
            weights,
        )
    }

    fn block_as_sym(m: &Matrix, offset: usize, len: usize) -> SymMatrix {
        SymMatrix::from_lower_fn(len, |i, j| {
            0.5 * (m[(offset + i, offset + j)] + m[(offset + j, offset + i)])
        })
    }

    #[test]
    fn information_coefficient_entry() {
        // p = 2, K = 2, c_2 = 2, equal weights: (p/2) r_2 / c_2^2 = 0.125
        let a = LowerTriangular::identity(2);
        let params = CholRootParam::new(Coefficients::new(vec![1.0, 2.0]).unwrap(), a).unwrap();
        let info = information_cb(&params, &[0.5, 0.5]).unwrap();
        assert!((info.matrix()[(0, 0)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn information_identity_blocks() {
        // unit root, one group: block i has unit diagonal except 2 in the
        // last position, nothing off the diagonal
        let p = 3;
        let params =
            CholRootParam::new(Coefficients::ones(1), LowerTriangular::identity(p)).unwrap();
        let info = information_cb(&params, &[1.0]).unwrap();
        let map = info.index_map().clone();
        for col in 0..p {
            let (offset, len) = map.column_block(col);
            for r in 0..len {
                for s in 0..len {
                    let expected = if r == s {
                        if r == col {
                            2.0
                        } else {
                            1.0
                        }
                    } else {
                        0.0
                    };
                    assert_eq!(info.matrix()[(offset + r, offset + s)], expected);
                }
            }
        }
    }

    #[test]
    fn information_block_diagonal_across_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let (params, weights) = random_instance(4, 3, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let map = info.index_map().clone();
        for i in 0..4usize {
            for j in 0..4usize {
                if i == j {
                    continue;
                }
                let (oi, li) = map.column_block(i);
                let (oj, lj) = map.column_block(j);
                for r in 0..li {
                    for s in 0..lj {
                        assert_eq!(info.matrix()[(oi + r, oj + s)], 0.0);
                    }
                }
            }
        }
        // off-diagonal entries of a column block never couple to coefficients
        for g in 0..map.coeff_len() {
            for col in 0..4usize {
                let (offset, len) = map.column_block(col);
                for r in 0..len - 1 {
                    assert_eq!(info.matrix()[(g, offset + r)], 0.0);
                }
            }
        }
    }

    #[test]
    fn i22_block_inverse_scalar_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = random_root(1, &mut rng);
        let inv = i22_block_inverse(&a, 0).unwrap();
        let b11 = 1.0 / a[(0, 0)];
        assert!((inv[(0, 0)] - 0.5 * b11 * b11).abs() < 1e-15);
        assert!((inv[(0, 0)] - 0.5 / (a[(0, 0)] * a[(0, 0)])).abs() < 1e-15);

        let inv = i22_block_inverse(&LowerTriangular::identity(2), 1).unwrap();
        assert!((inv[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.5).abs() < 1e-15);
        assert!(inv[(0, 1)].abs() < 1e-15);

        assert!(i22_block_inverse(&LowerTriangular::identity(2), 2).is_err());
    }

    #[test]
    fn i22_block_inverse_multiplies_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let (params, weights) = random_instance(4, 2, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let map = info.index_map().clone();
        for col in 0..4usize {
            let (offset, len) = map.column_block(col);
            let block = info.matrix().block(offset, offset, len, len);
            let inv = i22_block_inverse(&params.a, col).unwrap();
            let prod = block.mul(&inv.to_matrix()).unwrap();
            assert!(prod.max_abs_diff(&Matrix::identity(len)) <= 1e-10);
        }
    }

    #[test]
    fn u11_worked_example_and_schur() {
        let c = Coefficients::new(vec![1.0, 1.0]).unwrap();
        let m = u11(&c, &[0.5, 0.5], 2).unwrap();
        assert!((m[(0, 0)] - 0.25).abs() < 1e-15);

        // Schur complement of the matrix block, numerically
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for &(p, k) in &[(2usize, 3usize), (3, 2), (4, 4)] {
            let (params, weights) = random_instance(p, k, &mut rng);
            let info = information_cb(&params, &weights).unwrap();
            let q = info.dim();
            let kc = k - 1;
            let i11 = info.matrix().block(0, 0, kc, kc);
            let i12 = info.matrix().block(0, kc, kc, q - kc);
            let i22_inv = sym_inverse(&block_as_sym(info.matrix(), kc, q - kc))
                .unwrap()
                .to_matrix();
            let schur = i11
                .sub(&i12.mul(&i22_inv).unwrap().mul(&i12.transpose()).unwrap())
                .unwrap();
            let closed = u11(&params.c, &weights, p).unwrap();
            assert!(schur.max_abs_diff(&closed) <= 1e-10);
        }
    }

    #[test]
    fn u11_decreases_in_c2() {
        let mut prev = f64::INFINITY;
        for i in 1..=40 {
            let c2 = i as f64 * 0.5;
            let c = Coefficients::new(vec![1.0, c2]).unwrap();
            let m = u11(&c, &[0.5, 0.5], 3).unwrap();
            assert!(m[(0, 0)] > 0.0 && m[(0, 0)] < prev);
            prev = m[(0, 0)];
        }
    }

    #[test]
    fn v11_worked_examples_and_inverse_pair() {
        let c = Coefficients::new(vec![1.0, 2.0]).unwrap();
        let m = v11(&c, &[0.5, 0.5], 2).unwrap();
        assert!((m[(0, 0)] - 16.0).abs() < 1e-12);

        // two groups: v11 = (2 c_2^2 / p)(1/r_1 + 1/r_2)
        let r = [0.3, 0.7];
        let p = 3;
        let m = v11(&c, &r, p).unwrap();
        let expected = 2.0 * 4.0 / p as f64 * (1.0 / r[0] + 1.0 / r[1]);
        assert!((m[(0, 0)] - expected).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let (params, weights) = random_instance(2, 4, &mut rng);
        let v = v11(&params.c, &weights, 2).unwrap();
        let u = u11(&params.c, &weights, 2).unwrap();
        assert!(v.mul(&u).unwrap().max_abs_diff(&Matrix::identity(3)) <= 1e-10);

        assert!(v11(&Coefficients::ones(1), &[1.0], 2).is_err());
    }

    #[test]
    fn v11_ignores_the_matrix_parameter() {
        let c = Coefficients::new(vec![1.0, 1.3, 0.6]).unwrap();
        let w = [0.25, 0.45, 0.3];
        let first = v11(&c, &w, 3).unwrap();
        let second = v11(&c, &w, 3).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn v12_cb_scalar_and_unit_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        // p = 1: single entry c_2 b_11 / (p r_1)
        let a = random_root(1, &mut rng);
        let b = b_from_a(&a).unwrap();
        let c = Coefficients::new(vec![1.0, 1.7]).unwrap();
        let w = [0.4, 0.6];
        let m = v12_cb(&c, &b, &w).unwrap();
        assert!((m[(0, 0)] - 1.7 * b[(0, 0)] / w[0]).abs() < 1e-12);

        // unit inverse root: block i carries c in its last column
        let p = 3;
        let c = Coefficients::new(vec![1.0, 2.0, 0.5]).unwrap();
        let w = [0.5, 0.25, 0.25];
        let m = v12_cb(&c, &UpperTriangular::identity(p), &w).unwrap();
        let map = ParamIndexMap::new(1, p, Parametrization::CholInv);
        let scale = 1.0 / (p as f64 * w[0]);
        for col in 0..p {
            let (offset, len) = map.column_block(col);
            for g in 0..2 {
                for j in 0..len {
                    let expected = if j == len - 1 { scale * c.free()[g] } else { 0.0 };
                    assert_eq!(m[(g, offset + j)], expected);
                }
            }
        }
    }

    #[test]
    fn v12_cb_matches_inverse_identity() {
        // v12 = -v11 * I12 * I22^{-1}
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let (params, weights) = random_instance(3, 3, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let q = info.dim();
        let kc = 2;
        let i12 = info.matrix().block(0, kc, kc, q - kc);
        let i22_inv = sym_inverse(&block_as_sym(info.matrix(), kc, q - kc))
            .unwrap()
            .to_matrix();
        let v = v11(&params.c, &weights, 3).unwrap();
        let expected = v.mul(&i12).unwrap().mul(&i22_inv).unwrap().scaled(-1.0);
        let closed = v12_cb(&params.c, &b_from_a(&params.a).unwrap(), &weights).unwrap();
        assert!(closed.max_abs_diff(&expected) <= 1e-10);
    }

    #[test]
    fn v22_cb_single_population_decouples() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let (d, e) = inflation_coefficients(4, 1.0);
        assert_eq!(d, -0.5);
        assert_eq!(e, 0.0);
        let a = random_root(4, &mut rng);
        let m = v22_cb(&b_from_a(&a).unwrap(), &[1.0]).unwrap();
        let map = ParamIndexMap::new(1, 4, Parametrization::CholInv);
        for i in 0..4usize {
            let (oi, li) = map.column_block(i);
            // diagonal block equals the closed-form information block inverse
            let inv = i22_block_inverse(&a, i).unwrap();
            for r in 0..li {
                for s in 0..li {
                    assert!((m[(oi + r, oi + s)] - inv[(r, s)]).abs() <= 1e-12);
                }
            }
            for j in 0..4usize {
                if i == j {
                    continue;
                }
                let (oj, lj) = map.column_block(j);
                for r in 0..li {
                    for s in 0..lj {
                        assert!(m[(oi + r, oj + s)] == 0.0);
                    }
                }
            }
        }
        // p = 1 special case: b_11^2 / 2
        let a = random_root(1, &mut rng);
        let b = b_from_a(&a).unwrap();
        let m = v22_cb(&b, &[1.0]).unwrap();
        assert!((m[(0, 0)] - 0.5 * b[(0, 0)] * b[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn v22_cb_matches_full_numeric_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let (params, weights) = random_instance(3, 3, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let full_inv = sym_inverse(&block_as_sym(info.matrix(), 0, info.dim()))
            .unwrap()
            .to_matrix();
        let kc = 2;
        let q2 = info.dim() - kc;
        let closed = v22_cb(&b_from_a(&params.a).unwrap(), &weights).unwrap();
        let block = full_inv.block(kc, kc, q2, q2);
        assert!(closed.max_abs_diff(&block) <= 1e-9);
    }

    #[test]
    fn jacobian_a_wrt_b_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let a = random_root(1, &mut rng);
        let jac = jacobian_a_wrt_b(&a);
        assert!((jac[(0, 0)] + a[(0, 0)] * a[(0, 0)]).abs() < 1e-15);

        // unit root: -1 exactly where the row label (j, i) and column
        // label (h, g) satisfy h = i and g = j
        let jac = jacobian_a_wrt_b(&LowerTriangular::identity(3));
        let rows = ParamIndexMap::new(1, 3, Parametrization::CholRoot);
        let cols = ParamIndexMap::new(1, 3, Parametrization::CholInv);
        for i in 0..3usize {
            for j in i..3 {
                let row = rows.position_of_entry(j, i);
                for g in 0..3usize {
                    for h in 0..=g {
                        let col = cols.position_of_entry(h, g);
                        let expected = if i == h && g == j { -1.0 } else { 0.0 };
                        assert_eq!(jac[(row, col)], expected, "a[{j}{i}] vs b[{h}{g}]");
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_a_wrt_b_is_block_upper_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = random_root(4, &mut rng);
        let jac = jacobian_a_wrt_b(&a);
        let rows = ParamIndexMap::new(1, 4, Parametrization::CholRoot);
        let cols = ParamIndexMap::new(1, 4, Parametrization::CholInv);
        for i in 0..4usize {
            let (ro, rl) = rows.column_block(i);
            for g in 0..i {
                let (co, cl) = cols.column_block(g);
                for r in 0..rl {
                    for s in 0..cl {
                        assert_eq!(jac[(ro + r, co + s)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn v_ca_sign_flip_and_scalar_case() {
        // with unit root and inverse root the two cross blocks differ by sign
        let p = 2;
        let c = Coefficients::new(vec![1.0, 1.5]).unwrap();
        let w = [0.5, 0.5];
        let m_b = v12_cb(&c, &UpperTriangular::identity(p), &w).unwrap();
        let m_a = v12_ca(&c, &LowerTriangular::identity(p), &w).unwrap();
        // packings differ, but both place the only nonzero of block i at
        // the diagonal entry of column i
        let map_b = ParamIndexMap::new(1, p, Parametrization::CholInv);
        let map_a = ParamIndexMap::new(1, p, Parametrization::CholRoot);
        for col in 0..p {
            let pos_b = map_b.position_of_entry(col, col);
            let pos_a = map_a.position_of_entry(col, col);
            assert!((m_b[(0, pos_b)] + m_a[(0, pos_a)]).abs() < 1e-15);
        }

        // p = 1, single population: a_11^2 / 2
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let a = random_root(1, &mut rng);
        let a11 = a[(0, 0)];
        let m = v22_ca(&a, &[1.0]).unwrap();
        assert!((m[(0, 0)] - 0.5 * a11 * a11).abs() < 1e-15);
    }

    #[test]
    fn v22_ca_last_block_coincides_with_general_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for k in [1usize, 3] {
            let (params, weights) = random_instance(3, k, &mut rng);
            let (d, _) = inflation_coefficients(3, weights[0]);
            let m = v22_ca(&params.a, &weights).unwrap();
            let map = ParamIndexMap::new(1, 3, Parametrization::CholRoot);
            let (o, l) = map.column_block(2);
            assert_eq!(l, 1);
            let app = params.a[(2, 2)];
            assert!((m[(o, o)] - (1.0 + d) * app * app).abs() <= 1e-14);
        }
    }

    #[test]
    fn v_ca_matches_delta_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for &(p, k) in &[(2usize, 2usize), (3, 3), (4, 2)] {
            let (params, weights) = random_instance(p, k, &mut rng);
            let v_cb = assemble_v(&params, &weights, Parametrization::CholInv).unwrap();
            let jac = jacobian_a_wrt_b(&params.a);
            let chained = conjugate_by_jacobian(v_cb.matrix(), &jac, k - 1).unwrap();
            let v_ca = assemble_v(&params, &weights, Parametrization::CholRoot).unwrap();
            assert!(v_ca.matrix().max_abs_diff(&chained) <= 1e-10);
        }
    }

    #[test]
    fn jacobian_sigma_wrt_a_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let a = random_root(1, &mut rng);
        let jac = jacobian_sigma_wrt_a(&a);
        assert!((jac[(0, 0)] - 2.0 * a[(0, 0)]).abs() < 1e-15);

        let jac = jacobian_sigma_wrt_a(&LowerTriangular::identity(2));
        let rows = ParamIndexMap::new(1, 2, Parametrization::Cov);
        let cols = ParamIndexMap::new(1, 2, Parametrization::CholRoot);
        // d sigma_21 / d a_21 = 1; d sigma_22 / d a_21 = 2 a_21 = 0
        assert_eq!(
            jac[(rows.position_of_entry(1, 0), cols.position_of_entry(1, 0))],
            1.0
        );
        assert_eq!(
            jac[(rows.position_of_entry(1, 1), cols.position_of_entry(1, 0))],
            0.0
        );
    }

    #[test]
    fn jacobian_sigma_wrt_a_is_block_lower_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        let a = random_root(4, &mut rng);
        let jac = jacobian_sigma_wrt_a(&a);
        let rows = ParamIndexMap::new(1, 4, Parametrization::Cov);
        let cols = ParamIndexMap::new(1, 4, Parametrization::CholRoot);
        for bi in 0..4usize {
            let (ro, rl) = rows.column_block(bi);
            for bj in (bi + 1)..4 {
                let (co, cl) = cols.column_block(bj);
                for r in 0..rl {
                    for s in 0..cl {
                        assert_eq!(jac[(ro + r, co + s)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn v_csigma_scalar_case_and_delta_chain() {
        // p = 1, single population: 2 sigma^4
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = random_root(1, &mut rng);
        let sigma = a[(0, 0)] * a[(0, 0)];
        let m = v22_csigma(&a, &[1.0]).unwrap();
        assert!((m[(0, 0)] - 2.0 * sigma * sigma).abs() < 1e-12);

        for &(p, k) in &[(2usize, 2usize), (3, 2), (3, 3)] {
            let (params, weights) = random_instance(p, k, &mut rng);
            let v_ca = assemble_v(&params, &weights, Parametrization::CholRoot).unwrap();
            let jac = jacobian_sigma_wrt_a(&params.a);
            let chained = conjugate_by_jacobian(v_ca.matrix(), &jac, k - 1).unwrap();
            let v_cs = assemble_v(&params, &weights, Parametrization::Cov).unwrap();
            assert!(v_cs.matrix().max_abs_diff(&chained) <= 1e-9);
        }
    }

    #[test]
    fn assemble_v_scalar_single_population() {
        let a = LowerTriangular::from_rows(&[vec![1.3]]).unwrap();
        let sigma = 1.3f64 * 1.3;
        let params = CholRootParam::new(Coefficients::ones(1), a).unwrap();
        let v = assemble_v(&params, &[1.0], Parametrization::Cov).unwrap();
        assert_eq!(v.dim(), 1);
        assert!((v.matrix()[(0, 0)] - 2.0 * sigma * sigma).abs() < 1e-12);
    }

    #[test]
    fn assemble_v_symmetric_psd_and_inverse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let (params, weights) = random_instance(2, 2, &mut rng);
        for parametrization in [
            Parametrization::CholInv,
            Parametrization::CholRoot,
            Parametrization::Cov,
        ] {
            let v = assemble_v(&params, &weights, parametrization).unwrap();
            assert!(v.matrix().max_abs_diff(&v.matrix().transpose()) <= 1e-12);
            // shifted factorization succeeding bounds the smallest
            // eigenvalue below by -1e-10
            let shifted = SymMatrix::from_lower_fn(v.dim(), |i, j| {
                v.matrix()[(i, j)] + if i == j { 1e-10 } else { 0.0 }
            });
            assert!(crate::linalg::cholesky_lower(&shifted).is_ok());
        }
    }

    #[test]
    fn inverse_pair_property_over_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        for &(p, k) in &[(1usize, 2usize), (2, 3), (3, 4), (5, 2), (4, 1)] {
            let (params, weights) = random_instance(p, k, &mut rng);
            let v = assemble_v(&params, &weights, Parametrization::CholInv).unwrap();
            let info = information_cb(&params, &weights).unwrap();
            let prod = v.matrix().mul(info.matrix()).unwrap();
            assert!(
                prod.max_abs_diff(&Matrix::identity(v.dim())) <= 1e-9,
                "p={p} K={k}"
            );
        }
    }

    #[test]
    fn standard_errors_scale_with_sample_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let (params, weights) = random_instance(2, 2, &mut rng);
        let v = assemble_v(&params, &weights, Parametrization::Cov).unwrap();
        let se100 = standard_errors(&v, 100.0);
        let se400 = standard_errors(&v, 400.0);
        for (a, b) in se100.iter().zip(&se400) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn packed_vector_and_blocks_line_up() {
        // position maps used by the covariance assembly agree with the
        // packing helpers
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let (params, _) = random_instance(3, 2, &mut rng);
        let packed = pack_chol_root(&params);
        let map = ParamIndexMap::new(2, 3, Parametrization::CholRoot);
        for col in 0..3usize {
            for row in col..3 {
                assert_eq!(packed[map.position_of_entry(row, col)], params.a[(row, col)]);
            }
        }
        let b = b_from_a(&params.a).unwrap();
        let packed_b = pack_b(&b);
        let map_b = ParamIndexMap::new(1, 3, Parametrization::CholInv);
        for col in 0..3usize {
            for row in 0..=col {
                assert_eq!(packed_b[map_b.position_of_entry(row, col)], b[(row, col)]);
            }
        }
    }
}
