//! Proportional covariance models: maximum likelihood estimation,
//! closed-form asymptotic covariances and a homogeneity test.
//!
//! The model ties `K` group covariance matrices together through a common
//! matrix and positive proportionality coefficients,
//! `Sigma_k = c_k * Sigma_1` with `c_1 = 1`. This crate fits the model to
//! sample covariance matrices by alternating exact block maximization,
//! evaluates the asymptotic covariance of the estimators in three
//! parametrizations (Cholesky inverse root, Cholesky root, covariance
//! matrix), and tests covariance homogeneity with a chi-squared statistic
//! built from the fitted coefficients.
//!
//! Modules:
//!
//! * [`linalg`]: small dense symmetric/triangular matrix kernels;
//! * [`model`]: parameter containers, packing layouts, conversions;
//! * [`mle`]: the alternating maximum likelihood fit;
//! * [`asymptotics`]: information matrix and covariance closed forms;
//! * [`inference`]: the homogeneity test and the chi-squared tail;
//! * [`montecarlo`]: Wishart sampling and simulation studies;
//! * [`oracle`]: independent numerical cross-checks and the validation
//!   registry (not used by any production path).

pub mod asymptotics;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod mle;
pub mod model;
pub mod montecarlo;
pub mod oracle;

pub use error::{Error, Result};
pub use linalg::{LowerTriangular, Matrix, SymMatrix, UpperTriangular};
pub use model::{
    CholInvParam, CholRootParam, Coefficients, CovParam, GroupSample, ParamIndexMap, ParamLabel,
    Parametrization, SampleSet,
};
