//! Command line front end: estimation, homogeneity testing, simulation
//! studies and numerical validation for proportional covariance models.
//!
//! Exit codes: 0 success, 1 failed checks or internal error, 2 parse or
//! config error, 3 invalid input covariance, 4 non-convergence, 5 too few
//! groups.

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use propcov::asymptotics::{assemble_v, standard_errors, AsymptoticCov};
use propcov::inference::homogeneity_statistic;
use propcov::mle::{fit, FitOptions, FitResult};
use propcov::model::{ParamLabel, Parametrization};
use propcov::montecarlo::{
    ks_critical_value, run_covariance_study, run_level_study, SimConfig,
};
use propcov::oracle::registry;
use propcov::{Coefficients, Error, SampleSet, SymMatrix};

use report::{emit_json, fmt6, fmt_matrix};

#[derive(Parser)]
#[command(
    name = "propcov",
    version,
    about = "Proportional covariance models: estimation, homogeneity testing, simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and report estimates with standard errors
    Estimate {
        /// JSON group document, or a CSV matrix together with --n
        input: PathBuf,
        /// Degrees of freedom for CSV input
        #[arg(long)]
        n: Option<usize>,
        /// Convergence tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iteration cap
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Also print the full asymptotic covariance in this parametrization
        #[arg(long, value_enum)]
        cov: Option<CovChoice>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Test homogeneity of the group covariance matrices
    Test {
        input: PathBuf,
        /// Degrees of freedom for CSV input
        #[arg(long)]
        n: Option<usize>,
        /// Convergence tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iteration cap
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a simulation study described by a JSON config file
    Simulate {
        config: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of replications
        #[arg(long)]
        reps: Option<usize>,
        /// Override the nominal level
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run every registered numerical cross-check
    Validate {
        /// Seed for the random instances
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CovChoice {
    /// Cholesky inverse root
    B,
    /// Cholesky root
    A,
    /// Covariance matrix
    Sigma,
}

impl From<CovChoice> for Parametrization {
    fn from(choice: CovChoice) -> Self {
        match choice {
            CovChoice::B => Parametrization::CholInv,
            CovChoice::A => Parametrization::CholRoot,
            CovChoice::Sigma => Parametrization::Cov,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Error with a process exit code attached.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn parse(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn invalid_matrix(message: String) -> Self {
        Self { code: 3, message }
    }

    fn from_core(err: Error) -> Self {
        let code = match err {
            Error::NotPositiveDefinite | Error::NotSymmetric { .. } | Error::SingularMatrix => 3,
            Error::NotConverged => 4,
            Error::KTooSmall(_) => 5,
            _ => 1,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::from_core(err)
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run() -> Result<u8, CliError> {
    match Cli::parse().command {
        Command::Estimate {
            input,
            n,
            tol,
            max_iter,
            cov,
            format,
        } => cmd_estimate(&input, n, FitOptions { tol, max_iter }, cov, format),
        Command::Test {
            input,
            n,
            tol,
            max_iter,
            format,
        } => cmd_test(&input, n, FitOptions { tol, max_iter }, format),
        Command::Simulate {
            config,
            seed,
            reps,
            level,
            format,
        } => cmd_simulate(&config, seed, reps, level, format),
        Command::Validate { seed, format } => cmd_validate(seed, format),
    }
}

fn label_text(label: &ParamLabel, parametrization: Parametrization) -> String {
    match label {
        ParamLabel::Coefficient { group } => format!("c[{}]", group + 1),
        ParamLabel::Entry { row, col } => {
            let name = match parametrization {
                Parametrization::CholInv => "b",
                Parametrization::CholRoot => "a",
                Parametrization::Cov => "sigma",
            };
            format!("{name}[{},{}]", row + 1, col + 1)
        }
    }
}

fn covariance_section(v: &AsymptoticCov, n_plus: f64) -> serde_json::Value {
    let labels: Vec<String> = v
        .index_map()
        .labels()
        .iter()
        .map(|l| label_text(l, v.parametrization()))
        .collect();
    json!({
        "parametrization": match v.parametrization() {
            Parametrization::CholInv => "b",
            Parametrization::CholRoot => "a",
            Parametrization::Cov => "sigma",
        },
        "labels": labels,
        "matrix": v.matrix().to_nested(),
        "standard_errors": standard_errors(v, n_plus),
    })
}

fn fit_or_report(data: &SampleSet, opts: &FitOptions) -> Result<FitResult, CliError> {
    fit(data, opts).map_err(CliError::from)
}

fn cmd_estimate(
    path: &PathBuf,
    csv_df: Option<usize>,
    opts: FitOptions,
    cov: Option<CovChoice>,
    format: Format,
) -> Result<u8, CliError> {
    let (data, labels) = input::read_samples(path, csv_df)?;
    let result = fit_or_report(&data, &opts)?;
    let n_plus = data.df_total();
    let weights = data.weights();
    let root = result.chol_root()?;
    let inv = result.chol_inv()?;
    let k = data.k_groups();

    let c_se: Vec<f64> = if k >= 2 {
        let v = propcov::asymptotics::v11(&result.params.c, &weights, data.dim())?;
        (0..k - 1).map(|g| (v[(g, g)] / n_plus).sqrt()).collect()
    } else {
        Vec::new()
    };

    let cov_matrix = match cov {
        Some(choice) => Some(assemble_v(&root, &weights, choice.into())?),
        None => None,
    };

    let mut doc = json!({
        "groups": labels,
        "n_plus": n_plus,
        "weights": weights,
        "converged": result.converged,
        "iterations": result.iterations,
        "loglik": result.loglik,
        "c_hat": result.params.c.as_slice(),
        "c_se": c_se,
        "sigma1": result.params.sigma1.to_nested(),
        "a": root.a.to_matrix().to_nested(),
        "b": inv.b.to_matrix().to_nested(),
    });
    if let Some(v) = &cov_matrix {
        doc["covariance"] = covariance_section(v, n_plus);
    }

    match format {
        Format::Json => println!("{}", emit_json(doc)),
        Format::Text => {
            println!("proportional covariance fit over {k} group(s)");
            println!(
                "  converged: {} after {} iteration(s), log-likelihood {}",
                result.converged,
                result.iterations,
                fmt6(result.loglik)
            );
            println!("  coefficients:");
            for (g, label) in labels.iter().enumerate() {
                let se = if g == 0 {
                    "(reference)".into()
                } else {
                    format!("se {}", fmt6(c_se[g - 1]))
                };
                println!(
                    "    {label}: c = {} {se}",
                    fmt6(result.params.c.get(g))
                );
            }
            println!("  common covariance matrix:");
            println!("{}", fmt_matrix(&result.params.sigma1.to_nested(), "    "));
            println!("  Cholesky root:");
            println!("{}", fmt_matrix(&root.a.to_matrix().to_nested(), "    "));
            println!("  Cholesky inverse root:");
            println!("{}", fmt_matrix(&inv.b.to_matrix().to_nested(), "    "));
            if let Some(v) = &cov_matrix {
                let labels: Vec<String> = v
                    .index_map()
                    .labels()
                    .iter()
                    .map(|l| label_text(l, v.parametrization()))
                    .collect();
                println!("  asymptotic covariance ({}):", labels.join(", "));
                println!("{}", fmt_matrix(&v.matrix().to_nested(), "    "));
                println!("  standard errors:");
                let ses = standard_errors(v, n_plus);
                for (label, se) in labels.iter().zip(&ses) {
                    println!("    {label}: {}", fmt6(*se));
                }
            }
        }
    }

    if result.converged {
        Ok(0)
    } else {
        eprintln!("warning: estimation did not converge within the iteration cap");
        Ok(4)
    }
}

fn cmd_test(
    path: &PathBuf,
    csv_df: Option<usize>,
    opts: FitOptions,
    format: Format,
) -> Result<u8, CliError> {
    let (data, _) = input::read_samples(path, csv_df)?;
    if data.k_groups() < 2 {
        return Err(CliError::from_core(Error::KTooSmall(data.k_groups())));
    }
    let result = fit_or_report(&data, &opts)?;
    if !result.converged {
        return Err(CliError {
            code: 4,
            message: "estimation did not converge; test statistic not reliable".into(),
        });
    }
    let report = homogeneity_statistic(
        &result.params.c,
        &data.weights(),
        data.dim(),
        data.df_total(),
    )?;

    match format {
        Format::Json => {
            let doc = json!({
                "statistic": report.statistic,
                "df": report.df,
                "p_value": report.p_value,
                "c_hat": report.c_hat.as_slice(),
                "quadratic_form": report.quadratic_form,
                "form_check": report.form_check,
            });
            println!("{}", emit_json(doc));
        }
        Format::Text => {
            println!("homogeneity of covariance matrices");
            println!(
                "  coefficients: {}",
                report
                    .c_hat
                    .as_slice()
                    .iter()
                    .map(|&c| fmt6(c))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("  statistic: {}", fmt6(report.statistic));
            println!("  degrees of freedom: {}", report.df);
            println!("  p-value: {}", fmt6(report.p_value));
            println!(
                "  dual-form check: {:.3e} (quadratic form {})",
                report.form_check,
                fmt6(report.quadratic_form)
            );
        }
    }
    Ok(0)
}

/// On-disk simulation config.
#[derive(Debug, Deserialize)]
struct SimFileConfig {
    study: String,
    c: Vec<f64>,
    sigma1: Vec<Vec<f64>>,
    group_sizes: Vec<usize>,
    replications: usize,
    seed: u64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_parametrization")]
    parametrization: String,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_parametrization() -> String {
    "sigma".into()
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    500
}

fn cmd_simulate(
    path: &PathBuf,
    seed: Option<u64>,
    reps: Option<usize>,
    level: Option<f64>,
    format: Format,
) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    let file: SimFileConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::parse(format!(
            "config parse error at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;

    let parametrization = match file.parametrization.as_str() {
        "b" => Parametrization::CholInv,
        "a" => Parametrization::CholRoot,
        "sigma" => Parametrization::Cov,
        other => {
            return Err(CliError::parse(format!(
                "unknown parametrization {other:?} (expected b, a or sigma)"
            )))
        }
    };
    let cfg = SimConfig {
        c: Coefficients::new(file.c).map_err(|e| CliError::parse(e.to_string()))?,
        sigma1: SymMatrix::from_rows(&file.sigma1)
            .map_err(|e| CliError::invalid_matrix(e.to_string()))?,
        group_sizes: file.group_sizes,
        replications: reps.unwrap_or(file.replications),
        seed: seed.unwrap_or(file.seed),
        alpha: level.unwrap_or(file.alpha),
        parametrization,
        fit_options: FitOptions {
            tol: file.tol,
            max_iter: file.max_iter,
        },
    };

    match file.study.as_str() {
        "covariance" => {
            let rep = run_covariance_study(&cfg).map_err(|e| match e {
                Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => {
                    CliError::parse(e.to_string())
                }
                other => CliError::from_core(other),
            })?;
            let doc = json!({
                "study": "covariance",
                "parametrization": file.parametrization,
                "replications": rep.replications_used,
                "failed_fits": rep.failed_fits,
                "n_plus": rep.n_plus,
                "theoretical": rep.theoretical.to_nested(),
                "empirical": rep.empirical.to_nested(),
                "rel_errors": rep.rel_errors.to_nested(),
                "masked_max_rel_error": rep.masked_max_rel_error,
            });
            match format {
                Format::Json => println!("{}", emit_json(doc)),
                Format::Text => {
                    println!("covariance study ({} parametrization)", file.parametrization);
                    println!(
                        "  replications kept: {} (failed fits: {})",
                        rep.replications_used, rep.failed_fits
                    );
                    println!(
                        "  worst relative error on masked entries: {}",
                        fmt6(rep.masked_max_rel_error)
                    );
                    println!("  closed-form covariance:");
                    println!("{}", fmt_matrix(&rep.theoretical.to_nested(), "    "));
                    println!("  empirical covariance:");
                    println!("{}", fmt_matrix(&rep.empirical.to_nested(), "    "));
                }
            }
            Ok(0)
        }
        "level" => {
            let rep = run_level_study(&cfg).map_err(|e| match e {
                Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => {
                    CliError::parse(e.to_string())
                }
                other => CliError::from_core(other),
            })?;
            let ks_crit = ks_critical_value(0.01);
            let doc = json!({
                "study": "level",
                "alpha": rep.alpha,
                "replications": rep.replications_used,
                "failed_fits": rep.failed_fits,
                "n_plus": rep.n_plus,
                "rejection_rate": rep.rejection_rate,
                "rejection_se": rep.rejection_se,
                "ks_statistic": rep.ks_statistic,
                "ks_critical_1pct": ks_crit,
            });
            match format {
                Format::Json => println!("{}", emit_json(doc)),
                Format::Text => {
                    println!("level study at alpha = {}", fmt6(rep.alpha));
                    println!(
                        "  replications kept: {} (failed fits: {})",
                        rep.replications_used, rep.failed_fits
                    );
                    println!(
                        "  rejection rate: {} (binomial se {})",
                        fmt6(rep.rejection_rate),
                        fmt6(rep.rejection_se)
                    );
                    println!(
                        "  p-value uniformity: scaled KS {} (1% critical value {})",
                        fmt6(rep.ks_statistic),
                        fmt6(ks_crit)
                    );
                }
            }
            Ok(0)
        }
        other => Err(CliError::parse(format!(
            "unknown study {other:?} (expected covariance or level)"
        ))),
    }
}

fn cmd_validate(seed: u64, format: Format) -> Result<u8, CliError> {
    let outcomes: Vec<_> = registry().iter().map(|check| check.run(seed)).collect();
    let all_passed = outcomes.iter().all(|o| o.passed);

    match format {
        Format::Json => {
            let doc = json!({
                "seed": seed,
                "all_passed": all_passed,
                "checks": outcomes.iter().map(|o| json!({
                    "name": o.name,
                    "max_discrepancy": o.max_discrepancy,
                    "tolerance": o.tolerance,
                    "passed": o.passed,
                })).collect::<Vec<_>>(),
            });
            println!("{}", emit_json(doc));
        }
        Format::Text => {
            println!("numerical validation (seed {seed})");
            for o in &outcomes {
                println!(
                    "  {} {:<40} max discrepancy {:.3e} (tolerance {:.0e})",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.max_discrepancy,
                    o.tolerance
                );
            }
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}
