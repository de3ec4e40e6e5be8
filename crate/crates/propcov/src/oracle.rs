//! Independent numerical cross-checks for every closed form in
//! [`crate::asymptotics`] and [`crate::inference`].
//!
//! Nothing in the production modules depends on this one; it exists for
//! the test suite and for the `validate` command. The checks recompute
//! each closed form along an independent route (finite differences of the
//! likelihood itself, dense matrix inversion, quadrature) and report the
//! worst discrepancy over seeded random instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::slices::{
    col_head_lower, col_head_upper, col_tail_lower, col_tail_sym, corner_lower, corner_sym, dot,
    leading_upper, mat_vec, row_tail_lower, selector, trailing_lower, unit, vec_mat,
};
use crate::asymptotics::{
    assemble_v, conjugate_by_jacobian, i22_block_inverse, information_cb, jacobian_a_wrt_b,
    jacobian_sigma_wrt_a, u11, v11, v22_ca, v22_cb, v22_csigma,
};
use crate::error::{Error, Result};
use crate::inference::{chi_square_sf, homogeneity_statistic};
use crate::linalg::{
    cholesky_lower, invert_lower_triangular, LowerTriangular, Matrix, SymMatrix,
};
use crate::model::{
    a_from_b, b_from_a, pack_a, pack_b, pack_chol_inv, pack_sigma, sigma_from_a, unpack_a,
    unpack_b, unpack_chol_inv, CholInvParam, CholRootParam, Coefficients, GroupSample,
    ParamIndexMap, Parametrization, SampleSet,
};

/// Step sizes for the finite-difference probes.
///
/// First derivatives use `step`; second derivatives use the much larger
/// `hessian_step` because their round-off error grows like `1 / h^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSettings {
    /// Relative step for first-derivative (Jacobian) probes.
    pub step: f64,
    /// Relative step for second-derivative (Hessian) probes.
    pub hessian_step: f64,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            step: 1e-6,
            hessian_step: 3e-4,
        }
    }
}

/// The oracle's own evaluation of the log-likelihood in the
/// coefficient/inverse-root parametrization, straight from the defining
/// sums. Kept separate from the production implementation on purpose.
pub fn loglik_cb(params: &CholInvParam, data: &SampleSet) -> f64 {
    let p = params.dim();
    let b = &params.b;
    let log_diag: f64 = (0..p).map(|i| b[(i, i)].ln()).sum();
    let mut l = data.df_total() * log_diag;
    for (k, group) in data.groups().iter().enumerate() {
        let ck = params.c.get(k);
        let s = group.covariance();
        let mut quad = 0.0;
        for col in 0..p {
            // b_col^T S b_col over the nonzero head of the column
            for r in 0..=col {
                for t in 0..=col {
                    quad += b[(r, col)] * s[(r, t)] * b[(t, col)];
                }
            }
        }
        l -= 0.5 * group.df() as f64 * (p as f64 * ck.ln() + quad / ck);
    }
    l
}

/// Builds a sample set with each group covariance pinned to its model
/// expectation `c_k * Sigma_1`. At such data the observed second
/// derivatives coincide with their expectations, because the likelihood is
/// linear in the group covariances.
pub fn data_at_expectation(params: &CholInvParam, dfs: &[usize]) -> Result<SampleSet> {
    if dfs.len() != params.c.len() {
        return Err(Error::DimensionMismatch {
            expected: params.c.len(),
            got: dfs.len(),
        });
    }
    let sigma1 = sigma_from_a(&a_from_b(&params.b)?);
    let groups = dfs
        .iter()
        .enumerate()
        .map(|(k, &n)| GroupSample::new(sigma1.scaled(params.c.get(k)), n))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(groups)
}

/// Central-difference Hessian of `-l / n_+` in the packed
/// coefficient/inverse-root coordinates.
///
/// Both index orders are computed; an asymmetry beyond `1e-5` reports
/// `StepTooLarge`, otherwise the symmetrized matrix is returned.
pub fn fd_hessian_loglik(
    params: &CholInvParam,
    data: &SampleSet,
    settings: &FdSettings,
) -> Result<Matrix> {
    if !(settings.hessian_step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let k = params.c.len();
    let p = params.dim();
    let n_plus = data.df_total();
    let at = pack_chol_inv(params);
    let q = at.len();
    let f = |theta: &[f64]| -> f64 {
        let params = unpack_chol_inv(k, p, theta).expect("packed vector has the right length");
        -loglik_cb(&params, data) / n_plus
    };
    let h: Vec<f64> = at
        .iter()
        .map(|x| settings.hessian_step * x.abs().max(1.0))
        .collect();

    let f0 = f(&at);
    let mut hess = Matrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let v = if i == j {
                let mut xp = at.clone();
                let mut xm = at.clone();
                xp[i] += h[i];
                xm[i] -= h[i];
                (f(&xp) - 2.0 * f0 + f(&xm)) / (h[i] * h[i])
            } else {
                let mut xpp = at.clone();
                let mut xpm = at.clone();
                let mut xmp = at.clone();
                let mut xmm = at.clone();
                xpp[i] += h[i];
                xpp[j] += h[j];
                xpm[i] += h[i];
                xpm[j] -= h[j];
                xmp[i] -= h[i];
                xmp[j] += h[j];
                xmm[i] -= h[i];
                xmm[j] -= h[j];
                (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = v;
        }
    }

    let asymmetry = hess.max_abs_diff(&hess.transpose());
    if asymmetry > 1e-5 * hess.max_abs().max(1.0) {
        return Err(Error::StepTooLarge(format!(
            "finite-difference Hessian asymmetry {asymmetry:e}"
        )));
    }
    let sym = hess.add(&hess.transpose()).unwrap().scaled(0.5);
    Ok(sym)
}

/// Central-difference Jacobian of a vector map.
pub fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(map: F, at: &[f64], step: f64) -> Result<Matrix> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let out_dim = map(at).len();
    let mut jac = Matrix::zeros(out_dim, at.len());
    for j in 0..at.len() {
        let h = step * at[j].abs().max(1.0);
        let mut xp = at.to_vec();
        let mut xm = at.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = map(&xp);
        let fm = map(&xm);
        for i in 0..out_dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Dense inverse of a positive definite matrix through its Cholesky
/// factor, verified by multiplying back; the residual must stay within
/// `1e-10`.
pub fn numeric_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky_lower(m)?;
    let w = invert_lower_triangular(&l)?;
    let p = m.dim();
    let inv = SymMatrix::from_lower_fn(p, |i, j| (i.max(j)..p).map(|k| w[(k, i)] * w[(k, j)]).sum());
    let residual = m
        .to_matrix()
        .mul(&inv.to_matrix())?
        .max_abs_diff(&Matrix::identity(p));
    if residual > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "inverse residual {residual:e} too large"
        )));
    }
    Ok(inv)
}

/// Random Cholesky root with diagonal bounded well away from zero, so
/// finite-difference truncation stays small.
pub fn random_root(p: usize, rng: &mut ChaCha8Rng) -> LowerTriangular {
    LowerTriangular::from_fn(p, |i, j| {
        if i == j {
            rng.gen_range(0.85..1.4)
        } else {
            rng.gen_range(-0.35..0.35)
        }
    })
}

/// Random parameters and degrees-of-freedom weights for `k` groups in
/// dimension `p`.
pub fn random_instance(
    p: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (CholRootParam, Vec<f64>, Vec<usize>) {
    let a = random_root(p, rng);
    let mut c = vec![1.0];
    for _ in 1..k {
        c.push(rng.gen_range(0.8..1.8));
    }
    let dfs: Vec<usize> = (0..k).map(|_| rng.gen_range(80..160)).collect();
    let total: f64 = dfs.iter().map(|&n| n as f64).sum();
    let weights = dfs.iter().map(|&n| n as f64 / total).collect();
    (
        CholRootParam::new(Coefficients::new(c).unwrap(), a).unwrap(),
        weights,
        dfs,
    )
}

/// Survival probability of the chi-squared distribution by composite
/// Simpson quadrature of the density. The substitution `t = u^2` removes
/// the origin singularity, leaving the smooth integrand
/// `2 u^{df-1} exp(-u^2/2) / (2^{df/2} Gamma(df/2))`.
pub fn chi_square_sf_quadrature(x: f64, df: usize, panels: usize) -> f64 {
    assert!(x >= 0.0 && df >= 1 && panels >= 1);
    if x == 0.0 {
        return 1.0;
    }
    let g = |u: f64| u.powi(df as i32 - 1) * (-0.5 * u * u).exp();
    let upper = x.sqrt();
    let n = 2 * panels;
    let h = upper / n as f64;
    let mut s = g(0.0) + g(upper);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    let integral = s * h / 3.0;
    let a = df as f64 / 2.0;
    1.0 - integral * 2.0 / (2f64.powf(a) * gamma_half_int(df))
}

/// `Gamma(df / 2)` for integer `df` by exact recursion.
fn gamma_half_int(df: usize) -> f64 {
    let mut x = df as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.25 {
        x -= 1.0;
        acc *= x;
    }
    if x < 0.75 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

/// Worst violation of the slice identities used by the covariance-block
/// derivations, over all admissible index combinations of one instance.
///
/// Covered identities, with `sigma = A A^T`, `B^T = A^{-1}`, `j <= i`,
/// `m <= i`, `i <= jj`:
///
/// 1. dropping the first `i - j` coordinates of root-column tail `j`
///    gives the shorter tail;
/// 2. the unit vector picks single entries out of a column tail;
/// 3. covariance column tails expand as root-weighted sums of root
///    column tails;
/// 4. unit rows of the trailing root submatrix are root row tails;
/// 5. selecting rows of the trailing root submatrix gives corner blocks;
/// 6. row-tail times corner-transpose expands as a weighted sum of
///    column tails;
/// 7. row-tail inner products are entry sums;
/// 8. outer products of covariance tails expand over root tails (both
///    pairings, including the regrouped three-part split);
/// 9. corner blocks split as head sums plus corner products at any cut;
/// 10. the entry-weighted corner identity combining 8 and 9;
/// 11. root and inverse-root column heads are biorthogonal.
pub fn slice_identity_discrepancy(a: &LowerTriangular) -> f64 {
    let p = a.dim();
    let b = b_from_a(a).expect("valid root");
    let sigma = sigma_from_a(a);
    let mut worst = 0.0f64;
    let mut track = |d: f64| {
        if d > worst {
            worst = d;
        }
    };
    let diff_vec = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };

    for i in 0..p {
        for j in 0..=i {
            // (1) selector drops leading coordinates of a tail
            let lhs = mat_vec(&selector(p - j, i - j), &col_tail_lower(a, j, j));
            track(diff_vec(&lhs, &col_tail_lower(a, j, i)));
            // (2) unit vector picks out one entry
            let picked = dot(&col_tail_lower(a, j, j), &unit(p - j, i - j));
            track((picked - a[(i, j)]).abs());
        }
        // (3) covariance tail as weighted sum of root tails
        let mut acc = vec![0.0; p - i];
        for j in 0..=i {
            for (t, v) in col_tail_lower(a, j, i).iter().enumerate() {
                acc[t] += a[(i, j)] * v;
            }
        }
        track(diff_vec(&acc, &col_tail_sym(&sigma, i, i)));
    }

    for i in 0..p {
        for m in 0..=i {
            // (4) unit row of the trailing submatrix
            let lhs = vec_mat(&unit(p - m, i - m), &trailing_lower(a, m));
            track(diff_vec(&lhs, &row_tail_lower(a, i, m)));
            // (5) selected rows of the trailing submatrix form a corner
            let lhs = selector(p - m, i - m).mul(&trailing_lower(a, m)).unwrap();
            track(lhs.max_abs_diff(&corner_lower(a, i, m)));
        }
    }

    for i in 0..p {
        for jj in i..p {
            for m in 0..=i {
                // (6) row tail times corner transpose
                let lhs = vec_mat(
                    &row_tail_lower(a, i, m),
                    &corner_lower(a, jj, m).transpose(),
                );
                let mut rhs = vec![0.0; p - jj];
                for u in m..=i {
                    for (t, v) in col_tail_lower(a, u, jj).iter().enumerate() {
                        rhs[t] += a[(i, u)] * v;
                    }
                }
                track(diff_vec(&lhs, &rhs));
                // (7) row-tail inner product
                let lhs = dot(&row_tail_lower(a, i, m), &row_tail_lower(a, jj, m));
                let rhs: f64 = (m..=i).map(|u| a[(i, u)] * a[(jj, u)]).sum();
                track((lhs - rhs).abs());
            }

            // (8) outer products of covariance tails over root tails
            let s_i = col_tail_sym(&sigma, i, i);
            let s_j = col_tail_sym(&sigma, jj, jj);
            let lhs = Matrix::outer(&s_i, &s_j);
            let mut rhs = Matrix::zeros(p - i, p - jj);
            for l in 0..=jj {
                for m in 0..=i {
                    let w = a[(i, m)] * a[(jj, l)];
                    let t_m = col_tail_lower(a, m, i);
                    let t_l = col_tail_lower(a, l, jj);
                    rhs = rhs.add(&Matrix::outer(&t_m, &t_l).scaled(w)).unwrap();
                }
            }
            track(lhs.max_abs_diff(&rhs));

            // same for the crossed pairing, plus its regrouped split
            let t_ji = col_tail_sym(&sigma, jj, i);
            let t_ij = col_tail_sym(&sigma, i, jj);
            let lhs = Matrix::outer(&t_ji, &t_ij);
            let mut rhs = Matrix::zeros(p - i, p - jj);
            for l in 0..=jj {
                for m in 0..=i {
                    let w = a[(i, m)] * a[(jj, l)];
                    rhs = rhs
                        .add(
                            &Matrix::outer(&col_tail_lower(a, l, i), &col_tail_lower(a, m, jj))
                                .scaled(w),
                        )
                        .unwrap();
                }
            }
            track(lhs.max_abs_diff(&rhs));
            let mut split = Matrix::zeros(p - i, p - jj);
            for m in 0..=i {
                let w = a[(i, m)] * a[(jj, m)];
                split = split
                    .add(
                        &Matrix::outer(&col_tail_lower(a, m, i), &col_tail_lower(a, m, jj))
                            .scaled(w),
                    )
                    .unwrap();
                let mut inner = vec![0.0; p - jj];
                for l in (m + 1)..=i {
                    for (t, v) in col_tail_lower(a, l, jj).iter().enumerate() {
                        inner[t] += a[(i, l)] * v;
                    }
                }
                split = split
                    .add(&Matrix::outer(&col_tail_lower(a, m, i), &inner).scaled(a[(jj, m)]))
                    .unwrap();
                for l in (m + 1)..=jj {
                    let w = a[(i, m)] * a[(jj, l)];
                    split = split
                        .add(
                            &Matrix::outer(&col_tail_lower(a, l, i), &col_tail_lower(a, m, jj))
                                .scaled(w),
                        )
                        .unwrap();
                }
            }
            track(lhs.max_abs_diff(&split));

            // (9) corner splits at any cut
            for m in 0..=i {
                let mut rhs = corner_lower(a, i, m)
                    .mul(&corner_lower(a, jj, m).transpose())
                    .unwrap();
                for u in 0..m {
                    rhs = rhs
                        .add(&Matrix::outer(
                            &col_tail_lower(a, u, i),
                            &col_tail_lower(a, u, jj),
                        ))
                        .unwrap();
                }
                track(rhs.max_abs_diff(&corner_sym(&sigma, i, jj)));
            }

            // (10) entry-weighted corner identity
            let lhs = corner_sym(&sigma, i, jj).scaled(sigma[(i, jj)]);
            let mut rhs = Matrix::zeros(p - i, p - jj);
            for m in 0..=i {
                let w = a[(i, m)] * a[(jj, m)];
                rhs = rhs
                    .add(
                        &corner_lower(a, i, m)
                            .mul(&corner_lower(a, jj, m).transpose())
                            .unwrap()
                            .scaled(w),
                    )
                    .unwrap();
            }
            for l in 0..i {
                let w: f64 = ((l + 1)..=i).map(|m| a[(i, m)] * a[(jj, m)]).sum();
                rhs = rhs
                    .add(
                        &Matrix::outer(&col_tail_lower(a, l, i), &col_tail_lower(a, l, jj))
                            .scaled(w),
                    )
                    .unwrap();
            }
            track(lhs.max_abs_diff(&rhs));
        }
    }

    // (11) biorthogonality of root and inverse-root column heads
    for i in 0..p {
        for l in i..p {
            let head_a = col_head_lower(a, i, l + 1);
            let head_b = col_head_upper(&b, l, l + 1);
            let delta = if i == l { 1.0 } else { 0.0 };
            track((dot(&head_a, &head_b) - delta).abs());
            let lhs = vec_mat(&head_a, &leading_upper(&b, l + 1));
            track(diff_vec(&lhs, &unit(l + 1, i)));
        }
    }

    worst
}

/// One entry of the validation registry.
pub struct OracleCheck {
    /// Stable identifier, printed by the validate command.
    pub name: &'static str,
    /// Closed forms this check is the designated oracle for.
    pub covers: &'static [&'static str],
    /// Largest acceptable discrepancy.
    pub tolerance: f64,
    runner: fn(u64) -> f64,
}

/// Outcome of one registry check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    pub fn run(&self, seed: u64) -> CheckOutcome {
        let max_discrepancy = (self.runner)(seed);
        CheckOutcome {
            name: self.name,
            max_discrepancy,
            tolerance: self.tolerance,
            passed: max_discrepancy <= self.tolerance,
        }
    }
}

/// Closed forms that must each be covered by exactly one registry check.
pub const VALIDATED_CLOSED_FORMS: &[&str] = &[
    "information_cb",
    "i22_block_inverse",
    "u11",
    "v11",
    "v12_cb",
    "v22_cb",
    "jacobian_a_wrt_b",
    "v12_ca",
    "v22_ca",
    "jacobian_sigma_wrt_a",
    "v12_csigma",
    "v22_csigma",
    "assemble_v",
    "homogeneity_statistic",
    "chi_square_sf",
];

fn shapes() -> &'static [(usize, usize)] {
    &[(1, 1), (1, 3), (2, 2), (3, 1), (3, 3), (2, 4)]
}

fn check_information_fd(seed: u64) -> f64 {
    let settings = FdSettings::default();
    let mut worst = 0.0f64;
    for (idx, &(p, k)) in shapes().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64) << 32);
        let (params, weights, dfs) = random_instance(p, k, &mut rng);
        let inv = params.to_chol_inv().unwrap();
        let data = data_at_expectation(&inv, &dfs).unwrap();
        let fd = fd_hessian_loglik(&inv, &data, &settings).unwrap();
        let info = information_cb(&params, &weights).unwrap();
        let scale = info.matrix().max_abs();
        worst = worst.max(fd.max_abs_diff(info.matrix()) / scale);
    }
    worst
}

fn check_information_zeros(seed: u64) -> f64 {
    let settings = FdSettings::default();
    let mut worst = 0.0f64;
    for (idx, &(p, k)) in shapes().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64) << 32 ^ 1);
        let (params, weights, dfs) = random_instance(p, k, &mut rng);
        let inv = params.to_chol_inv().unwrap();
        let data = data_at_expectation(&inv, &dfs).unwrap();
        let fd = fd_hessian_loglik(&inv, &data, &settings).unwrap();
        let info = information_cb(&params, &weights).unwrap();
        for i in 0..fd.rows() {
            for j in 0..fd.cols() {
                if info.matrix()[(i, j)] == 0.0 {
                    worst = worst.max(fd[(i, j)].abs());
                }
            }
        }
    }
    worst
}

fn check_i22_blocks(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes() {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let map = info.index_map().clone();
        for col in 0..p {
            let (offset, len) = map.column_block(col);
            let block = info.matrix().block(offset, offset, len, len);
            let inv = i22_block_inverse(&params.a, col).unwrap();
            let prod = block.mul(&inv.to_matrix()).unwrap();
            worst = worst.max(prod.max_abs_diff(&Matrix::identity(len)));
        }
    }
    worst
}

fn check_u11_schur(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes().iter().filter(|&&(_, k)| k >= 2) {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let q = info.dim();
        let kc = k - 1;
        let i11 = info.matrix().block(0, 0, kc, kc);
        let i12 = info.matrix().block(0, kc, kc, q - kc);
        let i22 = SymMatrix::from_lower_fn(q - kc, |i, j| info.matrix()[(kc + i, kc + j)]);
        let i22_inv = numeric_inverse(&i22).unwrap().to_matrix();
        let schur = i11
            .sub(&i12.mul(&i22_inv).unwrap().mul(&i12.transpose()).unwrap())
            .unwrap();
        let closed = u11(&params.c, &weights, p).unwrap();
        worst = worst.max(schur.max_abs_diff(&closed));
    }
    worst
}

fn check_v11_inverse_pair(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes().iter().filter(|&&(_, k)| k >= 2) {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let v = v11(&params.c, &weights, p).unwrap();
        let u = u11(&params.c, &weights, p).unwrap();
        worst = worst.max(v.mul(&u).unwrap().max_abs_diff(&Matrix::identity(k - 1)));
    }
    worst
}

fn check_full_inverse_blocks(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes() {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let info = information_cb(&params, &weights).unwrap();
        let q = info.dim();
        let inv = numeric_inverse(&SymMatrix::from_lower_fn(q, |i, j| {
            info.matrix()[(i, j)]
        }))
        .unwrap();
        let v = assemble_v(&params, &weights, Parametrization::CholInv).unwrap();
        worst = worst.max(v.matrix().max_abs_diff(&inv.to_matrix()));
    }
    worst
}

fn check_jacobian_a_wrt_b_fd(seed: u64) -> f64 {
    let settings = FdSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in 1..=4usize {
        let a = random_root(p, &mut rng);
        let b = b_from_a(&a).unwrap();
        let map = |theta: &[f64]| -> Vec<f64> {
            let b = unpack_b(p, theta).unwrap();
            pack_a(&a_from_b(&b).unwrap())
        };
        let fd = fd_jacobian(map, &pack_b(&b), settings.step).unwrap();
        let closed = jacobian_a_wrt_b(&a);
        worst = worst.max(fd.max_abs_diff(&closed));
    }
    worst
}

fn check_jacobian_sigma_wrt_a_fd(seed: u64) -> f64 {
    let settings = FdSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in 1..=4usize {
        let a = random_root(p, &mut rng);
        let map = |theta: &[f64]| -> Vec<f64> {
            let a = unpack_a(p, theta).unwrap();
            pack_sigma(&sigma_from_a(&a))
        };
        let fd = fd_jacobian(map, &pack_a(&a), settings.step).unwrap();
        let closed = jacobian_sigma_wrt_a(&a);
        worst = worst.max(fd.max_abs_diff(&closed));
    }
    worst
}

fn check_root_cov_delta_chain(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes() {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let v_cb = assemble_v(&params, &weights, Parametrization::CholInv).unwrap();
        let jac = jacobian_a_wrt_b(&params.a);
        let chained = conjugate_by_jacobian(v_cb.matrix(), &jac, k - 1).unwrap();
        let v_ca = assemble_v(&params, &weights, Parametrization::CholRoot).unwrap();
        worst = worst.max(v_ca.matrix().max_abs_diff(&chained));
    }
    worst
}

fn check_cov_matrix_delta_chain(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(p, k) in shapes() {
        let (params, weights, _) = random_instance(p, k, &mut rng);
        let v_cb = assemble_v(&params, &weights, Parametrization::CholInv).unwrap();
        let first = conjugate_by_jacobian(v_cb.matrix(), &jacobian_a_wrt_b(&params.a), k - 1)
            .unwrap();
        let chained =
            conjugate_by_jacobian(&first, &jacobian_sigma_wrt_a(&params.a), k - 1).unwrap();
        let v_cs = assemble_v(&params, &weights, Parametrization::Cov).unwrap();
        worst = worst.max(v_cs.matrix().max_abs_diff(&chained));
    }
    worst
}

fn check_single_population_reduction(seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for p in 1..=4usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64) << 48);
        let a = random_root(p, &mut rng);
        let sigma = sigma_from_a(&a);
        let weights = [1.0];
        let v = v22_csigma(&a, &weights).unwrap();
        let map = ParamIndexMap::new(1, p, Parametrization::Cov);

        // classical sample-covariance limit: cov of entries (s, i) and
        // (t, j) is sigma_st sigma_ij + sigma_sj sigma_it
        for i in 0..p {
            for s in i..p {
                for j in 0..p {
                    for t in j..p {
                        let expected =
                            sigma[(s, t)] * sigma[(i, j)] + sigma[(s, j)] * sigma[(i, t)];
                        let got =
                            v[(map.position_of_entry(s, i), map.position_of_entry(t, j))];
                        worst = worst.max((got - expected).abs());
                    }
                }
            }
        }

        // cross-column blocks of the root and inverse-root covariances
        // vanish identically when there is nothing else to estimate
        let v_b = v22_cb(&b_from_a(&a).unwrap(), &weights).unwrap();
        let v_a = v22_ca(&a, &weights).unwrap();
        let map_b = ParamIndexMap::new(1, p, Parametrization::CholInv);
        let map_a = ParamIndexMap::new(1, p, Parametrization::CholRoot);
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    continue;
                }
                let (oi_b, li_b) = map_b.column_block(i);
                let (oj_b, lj_b) = map_b.column_block(j);
                for r in 0..li_b {
                    for s in 0..lj_b {
                        worst = worst.max(v_b[(oi_b + r, oj_b + s)].abs());
                    }
                }
                let (oi_a, li_a) = map_a.column_block(i);
                let (oj_a, lj_a) = map_a.column_block(j);
                for r in 0..li_a {
                    for s in 0..lj_a {
                        worst = worst.max(v_a[(oi_a + r, oj_a + s)].abs());
                    }
                }
            }
        }
    }
    worst
}

fn check_slice_identities(seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for p in 1..=5usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64) << 40);
        let a = random_root(p, &mut rng);
        worst = worst.max(slice_identity_discrepancy(&a));
    }
    worst
}

fn check_homogeneity_dual_form(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.gen_range(2..=6);
        let mut c = vec![1.0];
        for _ in 1..k {
            c.push(rng.gen_range(0.5..2.0));
        }
        let dfs: Vec<f64> = (0..k).map(|_| rng.gen_range(50.0..400.0)).collect();
        let total: f64 = dfs.iter().sum();
        let weights: Vec<f64> = dfs.iter().map(|n| n / total).collect();
        let p = rng.gen_range(1..=5);
        let report =
            homogeneity_statistic(&Coefficients::new(c).unwrap(), &weights, p, total).unwrap();
        worst = worst.max(report.form_check / report.statistic.max(1.0));
    }
    worst
}

fn check_chi_square_sf_reference(seed: u64) -> f64 {
    let _ = seed;
    let mut worst = 0.0f64;
    for i in 0..=40 {
        let x = i as f64 * 0.5;
        // closed forms at one and two degrees of freedom
        let sf2 = chi_square_sf(x, 2).unwrap();
        worst = worst.max((sf2 - (-x / 2.0).exp()).abs());
        let sf1 = chi_square_sf(x, 1).unwrap();
        worst = worst.max((sf1 - chi_square_sf_quadrature(x, 1, 60_000)).abs());
    }
    for &df in &[3usize, 5, 10, 25, 50] {
        for &x in &[0.5, 2.0, 5.0, 11.07, 25.0, 60.0, 140.0, 200.0] {
            let sf = chi_square_sf(x, df).unwrap();
            worst = worst.max((sf - chi_square_sf_quadrature(x, df, 60_000)).abs());
        }
    }
    worst
}

/// The full validation registry: every closed form paired with its
/// designated independent check.
pub fn registry() -> Vec<OracleCheck> {
    vec![
        OracleCheck {
            name: "information.matches_fd_hessian",
            covers: &["information_cb"],
            tolerance: 1e-6,
            runner: check_information_fd,
        },
        OracleCheck {
            name: "information.structural_zeros",
            covers: &[],
            tolerance: 1e-8,
            runner: check_information_zeros,
        },
        OracleCheck {
            name: "i22_block_inverse.multiplies_back",
            covers: &["i22_block_inverse"],
            tolerance: 1e-10,
            runner: check_i22_blocks,
        },
        OracleCheck {
            name: "u11.matches_schur_complement",
            covers: &["u11"],
            tolerance: 1e-10,
            runner: check_u11_schur,
        },
        OracleCheck {
            name: "v11.inverts_u11",
            covers: &["v11"],
            tolerance: 1e-10,
            runner: check_v11_inverse_pair,
        },
        OracleCheck {
            name: "v_cb.matches_numeric_inverse",
            covers: &["v12_cb", "v22_cb", "assemble_v"],
            tolerance: 1e-9,
            runner: check_full_inverse_blocks,
        },
        OracleCheck {
            name: "jacobian_a_wrt_b.matches_fd",
            covers: &["jacobian_a_wrt_b"],
            tolerance: 1e-7,
            runner: check_jacobian_a_wrt_b_fd,
        },
        OracleCheck {
            name: "v_ca.matches_delta_chain",
            covers: &["v12_ca", "v22_ca"],
            tolerance: 1e-10,
            runner: check_root_cov_delta_chain,
        },
        OracleCheck {
            name: "jacobian_sigma_wrt_a.matches_fd",
            covers: &["jacobian_sigma_wrt_a"],
            tolerance: 1e-7,
            runner: check_jacobian_sigma_wrt_a_fd,
        },
        OracleCheck {
            name: "v_csigma.matches_delta_chain",
            covers: &["v12_csigma", "v22_csigma"],
            tolerance: 1e-10,
            runner: check_cov_matrix_delta_chain,
        },
        OracleCheck {
            name: "single_population.classical_covariance",
            covers: &[],
            tolerance: 1e-10,
            runner: check_single_population_reduction,
        },
        OracleCheck {
            name: "slice_identities.hold",
            covers: &[],
            tolerance: 1e-10,
            runner: check_slice_identities,
        },
        OracleCheck {
            name: "homogeneity.dual_form",
            covers: &["homogeneity_statistic"],
            tolerance: 1e-12,
            runner: check_homogeneity_dual_form,
        },
        OracleCheck {
            name: "chi_square_sf.reference_values",
            covers: &["chi_square_sf"],
            tolerance: 1e-9,
            runner: check_chi_square_sf_reference,
        },
    ]
}
