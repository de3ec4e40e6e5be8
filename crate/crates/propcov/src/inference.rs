//! Homogeneity test for the proportionality coefficients.
//!
//! Under the proportional covariance model, covariance homogeneity across
//! groups means all coefficients equal one. The statistic is the quadratic
//! form of the centered coefficient estimates in their estimated precision,
//!
//! ```text
//! T = n_+ (c_hat - 1)^T U11(c_hat) (c_hat - 1),
//! ```
//!
//! which collapses to a weighted variance of the inverse coefficients,
//!
//! ```text
//! T = (n_+ p / 2) [ sum_k r_k / c_k^2 - (sum_k r_k / c_k)^2 ],
//! ```
//!
//! summed over all groups with `c_1 = 1`. Both are computed; the simplified
//! form is the reported statistic (no matrix inverse near the null), the
//! quadratic form is kept as a cross check. The reference distribution is
//! chi-squared with `K - 1` degrees of freedom.

use crate::asymptotics::u11;
use crate::error::{Error, Result};
use crate::model::Coefficients;

/// Homogeneity test outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    /// The simplified-form statistic.
    pub statistic: f64,
    /// Degrees of freedom, `K - 1`.
    pub df: usize,
    /// Upper tail probability of the statistic.
    pub p_value: f64,
    /// Coefficient estimates the test was computed from.
    pub c_hat: Coefficients,
    /// The quadratic-form evaluation of the same statistic.
    pub quadratic_form: f64,
    /// Absolute difference between the two evaluations.
    pub form_check: f64,
}

/// Computes the homogeneity statistic from fitted coefficients.
///
/// `c_hat` must come from a converged fit; `dim` is the matrix dimension
/// `p` and `n_plus` the total degrees of freedom.
pub fn homogeneity_statistic(
    c_hat: &Coefficients,
    weights: &[f64],
    dim: usize,
    n_plus: f64,
) -> Result<TestReport> {
    let k = c_hat.len();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    if !(n_plus > 0.0) {
        return Err(Error::InvalidArgument(
            "total degrees of freedom must be positive".into(),
        ));
    }

    // simplified form, written as a weighted variance of 1/c_k for
    // stability near the null
    let mean_inv: f64 = (0..k).map(|g| weights[g] / c_hat.get(g)).sum();
    let var_inv: f64 = (0..k)
        .map(|g| {
            let dev = 1.0 / c_hat.get(g) - mean_inv;
            weights[g] * dev * dev
        })
        .sum();
    let statistic = 0.5 * n_plus * dim as f64 * var_inv;

    // quadratic form in the estimated precision of the coefficients
    let u = u11(c_hat, weights, dim)?;
    let centered: Vec<f64> = c_hat.free().iter().map(|c| c - 1.0).collect();
    let mut quadratic_form = 0.0;
    for (i, xi) in centered.iter().enumerate() {
        for (j, xj) in centered.iter().enumerate() {
            quadratic_form += xi * u[(i, j)] * xj;
        }
    }
    quadratic_form *= n_plus;

    let df = k - 1;
    Ok(TestReport {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
        c_hat: c_hat.clone(),
        quadratic_form,
        form_check: (statistic - quadratic_form).abs(),
    })
}

/// Upper tail probability of the chi-squared distribution with `df`
/// degrees of freedom: `1 - P(df/2, x/2)` with `P` the regularized lower
/// incomplete gamma function.
///
/// Series expansion below `a + 1`, continued fraction above; absolute
/// accuracy around `1e-12` for `x` up to a few hundred and moderate `df`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if x < 0.0 || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "chi-squared statistic must be nonnegative, got {x}"
        )));
    }
    if df == 0 {
        return Err(Error::InvalidArgument(
            "degrees of freedom must be at least 1".into(),
        ));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let a = df as f64 / 2.0;
    let half_x = x / 2.0;
    if x < df as f64 + 1.0 {
        Ok(1.0 - gamma_p_series(a, half_x, ln_gamma_half_int(df)))
    } else {
        Ok(gamma_q_continued_fraction(a, half_x, ln_gamma_half_int(df)))
    }
}

/// `ln Gamma(df / 2)` for integer `df`, by exact downward recursion to
/// `Gamma(1) = 1` or `Gamma(1/2) = sqrt(pi)`.
fn ln_gamma_half_int(df: usize) -> f64 {
    const LN_SQRT_PI: f64 = 0.5723649429247001;
    let mut x = df as f64 / 2.0;
    let mut acc = 0.0;
    while x > 1.25 {
        x -= 1.0;
        acc += x.ln();
    }
    // x is now 1 or 1/2
    if x < 0.75 {
        acc + LN_SQRT_PI
    } else {
        acc
    }
}

fn gamma_p_series(a: f64, x: f64, ln_gamma_a: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 0.0;
    for _ in 0..500 {
        n += 1.0;
        term *= x / (a + n);
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma_a).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64, ln_gamma_a: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma_a).exp() * h
}
