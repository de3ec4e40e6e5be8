//! Wishart sampling and simulation studies.
//!
//! Two studies are provided: [`run_covariance_study`] compares the
//! empirical covariance of `sqrt(n_+) (theta_hat - theta)` against the
//! closed-form asymptotic covariance evaluated at the true parameters, and
//! [`run_level_study`] measures the rejection rate of the homogeneity test
//! under the null.
//!
//! Reproducibility: every replication draws from its own ChaCha stream,
//! keyed by the configured seed and the replication index, so results are
//! bit-identical whether replications run serially or in parallel.
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat) and
//! chi-squared variates from `rand_distr::ChiSquared` (gamma sampling).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::{assemble_v, AsymptoticCov};
use crate::error::{Error, Result};
use crate::inference::homogeneity_statistic;
use crate::linalg::{cholesky_lower, LowerTriangular, Matrix, SymMatrix};
use crate::mle::{fit, FitOptions};
use crate::model::{
    pack_a, pack_b, pack_sigma, CholRootParam, Coefficients, GroupSample, Parametrization,
    SampleSet,
};

/// Fraction of replications allowed to fail before a study aborts.
const MAX_FAILURE_RATE: f64 = 0.001;

/// Configuration of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// True coefficients, first entry 1.
    pub c: Coefficients,
    /// True common covariance matrix.
    pub sigma1: SymMatrix,
    /// Per-group sample sizes `N_k`; degrees of freedom are `N_k - 1`.
    pub group_sizes: Vec<usize>,
    /// Number of replications.
    pub replications: usize,
    /// Base seed; replication `r` uses stream `r` of this seed.
    pub seed: u64,
    /// Nominal level for level studies.
    pub alpha: f64,
    /// Which parameter vector a covariance study records.
    pub parametrization: Parametrization,
    /// Estimation controls used inside each replication.
    pub fit_options: FitOptions,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        let p = self.sigma1.dim();
        if self.c.len() != self.group_sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.c.len(),
                got: self.group_sizes.len(),
            });
        }
        if self.group_sizes.iter().any(|&n| n <= p) {
            return Err(Error::InvalidArgument(
                "group sizes must exceed the dimension".into(),
            ));
        }
        if self.replications < 100 {
            return Err(Error::InvalidArgument(
                "need at least 100 replications".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument("alpha must lie in [0, 1]".into()));
        }
        cholesky_lower(&self.sigma1)?;
        Ok(())
    }

    fn dfs(&self) -> Vec<usize> {
        self.group_sizes.iter().map(|&n| n - 1).collect()
    }

    fn n_plus(&self) -> f64 {
        self.dfs().iter().map(|&n| n as f64).sum()
    }

    fn weights(&self) -> Vec<f64> {
        let total = self.n_plus();
        self.dfs().iter().map(|&n| n as f64 / total).collect()
    }

    fn rng_for_replication(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64 + 1);
        rng
    }
}

/// Outcome of a covariance study.
#[derive(Debug, Clone, PartialEq)]
pub struct CovStudyReport {
    /// Which parameter vector was recorded.
    pub parametrization: Parametrization,
    /// Empirical covariance of the scaled estimator deviations.
    pub empirical: Matrix,
    /// Closed-form covariance at the true parameters.
    pub theoretical: Matrix,
    /// `|empirical - theoretical| / max(|theoretical|, mask)` elementwise,
    /// with `mask = 0.05 * max |theoretical|`.
    pub rel_errors: Matrix,
    /// Worst relative error over entries above the mask.
    pub masked_max_rel_error: f64,
    /// Replications that were kept.
    pub replications_used: usize,
    /// Replications whose fit did not converge.
    pub failed_fits: usize,
    /// Total degrees of freedom per replication.
    pub n_plus: f64,
}

/// Outcome of a level study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStudyReport {
    /// Nominal level.
    pub alpha: f64,
    /// Fraction of replications with `p <= alpha`.
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub rejection_se: f64,
    /// Kolmogorov-Smirnov distance of the p-values from uniformity,
    /// scaled by `sqrt(R)`.
    pub ks_statistic: f64,
    /// Replications that were kept.
    pub replications_used: usize,
    /// Replications whose fit did not converge.
    pub failed_fits: usize,
    /// Total degrees of freedom per replication.
    pub n_plus: f64,
}

/// Draws an unbiased covariance estimate whose scaled version follows the
/// Wishart distribution with `n` degrees of freedom and scale `sigma`.
///
/// Uses the triangular factorization of the Wishart draw: `S = (A L)(A L)^T / n`
/// with `A` the Cholesky root of `sigma` and `L` lower triangular with
/// `chi(n - i)` diagonal and standard normal subdiagonal. `E[S] = sigma`.
pub fn sample_wishart<R: Rng + ?Sized>(
    sigma: &SymMatrix,
    n: usize,
    rng: &mut R,
) -> Result<SymMatrix> {
    let p = sigma.dim();
    if n < p {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom {n} below dimension {p}"
        )));
    }
    let root = cholesky_lower(sigma)?;
    // triangular factor filled in a fixed row-major order so draws are
    // seed-stable
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            if i == j {
                let chi = ChiSquared::new((n - i) as f64).map_err(|e| {
                    Error::InvalidArgument(format!("chi-squared parameter: {e}"))
                })?;
                entries[i * p + j] = chi.sample(rng).sqrt();
            } else {
                let z: f64 = StandardNormal.sample(rng);
                entries[i * p + j] = z;
            }
        }
    }
    let bartlett = LowerTriangular::from_fn(p, |i, j| entries[i * p + j]);
    let factor = root.to_matrix().mul(&bartlett.to_matrix())?;
    let scale = 1.0 / n as f64;
    Ok(SymMatrix::from_lower_fn(p, |i, j| {
        scale * (0..p).map(|k| factor[(i, k)] * factor[(j, k)]).sum::<f64>()
    }))
}

fn draw_sample_set(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
    let dfs = cfg.dfs();
    let groups = (0..cfg.c.len())
        .map(|k| {
            let sigma_k = cfg.sigma1.scaled(cfg.c.get(k));
            let s = sample_wishart(&sigma_k, dfs[k], rng)?;
            GroupSample::new(s, dfs[k])
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(groups)
}

fn true_parameter_vector(cfg: &SimConfig) -> Result<Vec<f64>> {
    let root = CholRootParam::new(cfg.c.clone(), cholesky_lower(&cfg.sigma1)?)?;
    let mut theta = cfg.c.free().to_vec();
    match cfg.parametrization {
        Parametrization::CholInv => theta.extend(pack_b(&root.to_chol_inv()?.b)),
        Parametrization::CholRoot => theta.extend(pack_a(&root.a)),
        Parametrization::Cov => theta.extend(pack_sigma(&cfg.sigma1)),
    }
    Ok(theta)
}

fn fitted_parameter_vector(
    result: &crate::mle::FitResult,
    parametrization: Parametrization,
) -> Result<Vec<f64>> {
    let mut theta = result.params.c.free().to_vec();
    match parametrization {
        Parametrization::CholInv => theta.extend(pack_b(&result.chol_inv()?.b)),
        Parametrization::CholRoot => theta.extend(pack_a(&result.chol_root()?.a)),
        Parametrization::Cov => theta.extend(pack_sigma(&result.params.sigma1)),
    }
    Ok(theta)
}

/// Closed-form covariance at the configured true parameters.
pub fn theoretical_covariance(cfg: &SimConfig) -> Result<AsymptoticCov> {
    let root = CholRootParam::new(cfg.c.clone(), cholesky_lower(&cfg.sigma1)?)?;
    assemble_v(&root, &cfg.weights(), cfg.parametrization)
}

/// Draws, fits and aggregates scaled estimator deviations, then compares
/// their empirical covariance entrywise with the closed form.
///
/// Replications run in parallel; failed fits are excluded and counted, and
/// the study aborts if more than 0.1 percent fail.
pub fn run_covariance_study(cfg: &SimConfig) -> Result<CovStudyReport> {
    cfg.validate()?;
    let n_plus = cfg.n_plus();
    let sqrt_n = n_plus.sqrt();
    let theta_true = true_parameter_vector(cfg)?;
    let theoretical = theoretical_covariance(cfg)?;

    let deviations: Vec<Option<Vec<f64>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = cfg.rng_for_replication(rep);
            let data = draw_sample_set(cfg, &mut rng).ok()?;
            let result = fit(&data, &cfg.fit_options).ok()?;
            if !result.converged {
                return None;
            }
            let theta = fitted_parameter_vector(&result, cfg.parametrization).ok()?;
            Some(
                theta
                    .iter()
                    .zip(&theta_true)
                    .map(|(hat, truth)| sqrt_n * (hat - truth))
                    .collect(),
            )
        })
        .collect();

    let kept: Vec<&Vec<f64>> = deviations.iter().flatten().collect();
    let failed = cfg.replications - kept.len();
    if (failed as f64) > MAX_FAILURE_RATE * cfg.replications as f64 {
        return Err(Error::NotConverged);
    }

    let q = theta_true.len();
    let r = kept.len();
    let mut mean = vec![0.0; q];
    for dev in &kept {
        for (m, d) in mean.iter_mut().zip(dev.iter()) {
            *m += d;
        }
    }
    for m in mean.iter_mut() {
        *m /= r as f64;
    }
    let mut empirical = Matrix::zeros(q, q);
    for dev in &kept {
        for i in 0..q {
            for j in 0..q {
                empirical[(i, j)] += (dev[i] - mean[i]) * (dev[j] - mean[j]);
            }
        }
    }
    empirical = empirical.scaled(1.0 / (r as f64 - 1.0));

    let mask = 0.05 * theoretical.matrix().max_abs();
    let mut rel_errors = Matrix::zeros(q, q);
    let mut masked_max = 0.0f64;
    for i in 0..q {
        for j in 0..q {
            let t = theoretical.matrix()[(i, j)];
            let diff = (empirical[(i, j)] - t).abs();
            rel_errors[(i, j)] = diff / t.abs().max(mask);
            if t.abs() > mask {
                masked_max = masked_max.max(diff / t.abs());
            }
        }
    }

    Ok(CovStudyReport {
        parametrization: cfg.parametrization,
        empirical,
        theoretical: theoretical.matrix().clone(),
        rel_errors,
        masked_max_rel_error: masked_max,
        replications_used: r,
        failed_fits: failed,
        n_plus,
    })
}

/// Rejection rate and p-value uniformity of the homogeneity test under
/// the null. Requires all true coefficients equal to one.
pub fn run_level_study(cfg: &SimConfig) -> Result<LevelStudyReport> {
    cfg.validate()?;
    if cfg.c.as_slice().iter().any(|&c| c != 1.0) {
        return Err(Error::InvalidArgument(
            "level studies require unit coefficients".into(),
        ));
    }
    if cfg.c.len() < 2 {
        return Err(Error::KTooSmall(cfg.c.len()));
    }
    let n_plus = cfg.n_plus();
    let weights = cfg.weights();
    let dim = cfg.sigma1.dim();

    let p_values: Vec<Option<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = cfg.rng_for_replication(rep);
            let data = draw_sample_set(cfg, &mut rng).ok()?;
            let result = fit(&data, &cfg.fit_options).ok()?;
            if !result.converged {
                return None;
            }
            let report = homogeneity_statistic(&result.params.c, &weights, dim, n_plus).ok()?;
            Some(report.p_value)
        })
        .collect();

    let kept: Vec<f64> = p_values.iter().flatten().copied().collect();
    let failed = cfg.replications - kept.len();
    if (failed as f64) > MAX_FAILURE_RATE * cfg.replications as f64 {
        return Err(Error::NotConverged);
    }

    let r = kept.len();
    let rejections = kept.iter().filter(|&&p| p <= cfg.alpha).count();
    let rate = rejections as f64 / r as f64;
    let se = (rate * (1.0 - rate) / r as f64).sqrt();

    Ok(LevelStudyReport {
        alpha: cfg.alpha,
        rejection_rate: rate,
        rejection_se: se,
        ks_statistic: ks_distance_from_uniform(&kept) * (r as f64).sqrt(),
        replications_used: r,
        failed_fits: failed,
        n_plus,
    })
}

/// Kolmogorov-Smirnov distance between a sample and the uniform
/// distribution on the unit interval.
pub fn ks_distance_from_uniform(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let upper = (i as f64 + 1.0) / n - x;
        let lower = x - i as f64 / n;
        d = d.max(upper.max(lower));
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov critical value `sqrt(-ln(alpha/2) / 2)`
/// for the scaled statistic `sqrt(R) D`.
pub fn ks_critical_value(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}
