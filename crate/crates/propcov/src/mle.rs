//! Maximum likelihood estimation for the proportional covariance model.
//!
//! The log-likelihood of `(c, B)` given group covariances `S_k` on `n_k`
//! degrees of freedom is, up to an additive constant,
//!
//! ```text
//! l(c, B) = n_+ * sum_i log(b_ii)
//!         - sum_k (n_k / 2) * { p log(c_k) + (1/c_k) sum_i b_i^T S_k b_i }
//! ```
//!
//! with `b_i` the columns of `B` and `n_+` the total degrees of freedom.
//! Setting the first derivatives to zero gives two exact block maximizers:
//!
//! * given `c`: `Sigma_1 = sum_k r_k S_k / c_k` (weighted pooling),
//! * given `Sigma_1`: `c_k = tr(Sigma_1^{-1} S_k) / p`, `c_1` pinned to 1.
//!
//! [`fit`] alternates the two until neither the parameters nor the
//! log-likelihood move. Each half step maximizes its block exactly, so the
//! trace of log-likelihood values never decreases.

use crate::error::{Error, Result};
use crate::linalg::{sym_inverse, trace_of_product, SymMatrix};
use crate::model::{
    a_from_sigma, b_from_a, sigma_inv_from_b, CholInvParam, CholRootParam, Coefficients, CovParam,
    SampleSet,
};

/// Convergence controls for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Threshold applied to both the relative parameter change and the
    /// log-likelihood increase.
    pub tol: f64,
    /// Iteration cap; exceeding it yields `converged = false`, not an error.
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Estimates in the covariance parametrization.
    pub params: CovParam,
    /// Log-likelihood at the estimates (additive constant dropped).
    pub loglik: f64,
    /// Number of completed alternation sweeps.
    pub iterations: usize,
    /// Whether both stopping criteria were met within the iteration cap.
    pub converged: bool,
    /// Log-likelihood after initialization and after every sweep.
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    /// Estimates as `(c, A)` with `A` the Cholesky root of the fitted
    /// common covariance matrix.
    pub fn chol_root(&self) -> Result<CholRootParam> {
        CholRootParam::from_cov(&self.params)
    }

    /// Estimates as `(c, B)` with `B` the Cholesky inverse root.
    pub fn chol_inv(&self) -> Result<CholInvParam> {
        self.chol_root()?.to_chol_inv()
    }
}

/// Log-likelihood of a covariance parameter, additive constant dropped.
///
/// The inverse root `B` is derived from `Sigma_1` and the quadratic forms
/// are accumulated column by column.
pub fn loglik(params: &CovParam, data: &SampleSet) -> Result<f64> {
    let p = params.dim();
    if data.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: data.dim(),
        });
    }
    if params.c.len() != data.k_groups() {
        return Err(Error::DimensionMismatch {
            expected: data.k_groups(),
            got: params.c.len(),
        });
    }
    let a = a_from_sigma(&params.sigma1)?;
    let b = b_from_a(&a)?;
    let sigma_inv = sigma_inv_from_b(&b);

    let log_diag: f64 = (0..p).map(|i| b[(i, i)].ln()).sum();
    let mut l = data.df_total() * log_diag;
    for (k, group) in data.groups().iter().enumerate() {
        let ck = params.c.get(k);
        // sum_i b_i^T S_k b_i = tr(Sigma_1^{-1} S_k)
        let quad = trace_of_product(&sigma_inv, group.covariance())?;
        l -= 0.5 * group.df() as f64 * (p as f64 * ck.ln() + quad / ck);
    }
    Ok(l)
}

/// Exact maximizer of the likelihood over the coefficients for a fixed
/// common covariance matrix: `c_k = tr(Sigma_1^{-1} S_k) / p`, `c_1 = 1`.
pub fn update_c(sigma1: &SymMatrix, data: &SampleSet) -> Result<Coefficients> {
    let p = sigma1.dim();
    if data.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: data.dim(),
        });
    }
    let sigma_inv = sym_inverse(sigma1)?;
    let mut c = vec![1.0];
    for group in &data.groups()[1..] {
        c.push(trace_of_product(&sigma_inv, group.covariance())? / p as f64);
    }
    Coefficients::new(c)
}

/// Exact maximizer of the likelihood over the common covariance matrix for
/// fixed coefficients: the pooled weighted average `sum_k r_k S_k / c_k`.
pub fn update_sigma(c: &Coefficients, data: &SampleSet) -> Result<SymMatrix> {
    if c.len() != data.k_groups() {
        return Err(Error::DimensionMismatch {
            expected: data.k_groups(),
            got: c.len(),
        });
    }
    let p = data.dim();
    let weights = data.weights();
    Ok(SymMatrix::from_lower_fn(p, |i, j| {
        data.groups()
            .iter()
            .enumerate()
            .map(|(k, g)| weights[k] / c.get(k) * g.covariance()[(i, j)])
            .sum()
    }))
}

/// Fits the proportional covariance model by alternating the two exact
/// block updates, starting from unit coefficients (so the first common
/// covariance matrix is the pooled one).
///
/// Groups need `n_k >= p` so that the likelihood and the asymptotics are
/// well defined; smaller groups report `NotPositiveDefinite`.
pub fn fit(data: &SampleSet, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    let p = data.dim();
    if data.groups().iter().any(|g| g.df() < p) {
        return Err(Error::NotPositiveDefinite);
    }

    let mut c = Coefficients::ones(data.k_groups());
    let mut sigma = update_sigma(&c, data)?;
    let mut l = loglik(&CovParam::new(c.clone(), sigma.clone())?, data)?;
    let mut trace = vec![l];

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let c_next = update_c(&sigma, data)?;
        let sigma_next = update_sigma(&c_next, data)?;
        let l_next = loglik(&CovParam::new(c_next.clone(), sigma_next.clone())?, data)?;

        let mut delta = 0.0f64;
        for (new, old) in c_next.as_slice().iter().zip(c.as_slice()) {
            delta = delta.max((new - old).abs() / old.abs().max(1.0));
        }
        let sigma_scale = sigma.max_abs().max(1.0);
        delta = delta.max(sigma_next.max_abs_diff(&sigma) / sigma_scale);
        let gain = (l_next - l) / l_next.abs().max(1.0);

        c = c_next;
        sigma = sigma_next;
        l = l_next;
        trace.push(l);

        if delta < opts.tol && gain < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        params: CovParam::new(c, sigma)?,
        loglik: l,
        iterations,
        converged,
        loglik_trace: trace,
    })
}
