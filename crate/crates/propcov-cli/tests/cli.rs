//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_propcov"))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("propcov-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const IDENTICAL_GROUPS: &str = r#"{"groups": [
  {"n": 60, "S": [[2.0, 0.5], [0.5, 1.0]]},
  {"n": 60, "S": [[2.0, 0.5], [0.5, 1.0]]}
]}"#;

#[test]
fn estimate_identical_groups() {
    let path = write_temp("identical.json", IDENTICAL_GROUPS);
    let out = binary()
        .args([
            "estimate",
            path.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let c2 = doc["c_hat"][1].as_f64().unwrap();
    assert!((c2 - 1.0).abs() <= 1e-10);
    // closed form for two groups: se = sqrt( (2 c^2 / p)(1/r1 + 1/r2) / n )
    let se = doc["c_se"][0].as_f64().unwrap();
    let expected = (2.0 * 1.0 / 2.0 * (2.0 + 2.0) / 120.0f64).sqrt();
    assert!((se - expected).abs() <= 1e-9, "se {se} vs {expected}");
    let s11 = doc["sigma1"][0][0].as_f64().unwrap();
    assert!((s11 - 2.0).abs() <= 1e-9);
}

#[test]
fn estimate_scalar_two_groups_closed_form() {
    let path = write_temp(
        "scalar.json",
        r#"{"groups": [
            {"n": 100, "S": [[1.0]]},
            {"n": 100, "S": [[4.0]]}
        ]}"#,
    );
    let out = binary()
        .args(["estimate", path.to_str().unwrap(), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!((doc["c_hat"][1].as_f64().unwrap() - 4.0).abs() <= 1e-8);
    assert!((doc["sigma1"][0][0].as_f64().unwrap() - 1.0).abs() <= 1e-8);
}

#[test]
fn estimate_malformed_json_is_exit_2_with_location() {
    let path = write_temp("broken.json", "{\"groups\": [ {\"n\": 5,\n  oops");
    let out = binary()
        .args(["estimate", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn estimate_non_spd_is_exit_3() {
    let path = write_temp(
        "notspd.json",
        r#"{"groups": [{"n": 30, "S": [[1.0, 2.0], [2.0, 1.0]]}]}"#,
    );
    let out = binary()
        .args(["estimate", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn estimate_nonconvergence_is_exit_4_with_report() {
    let path = write_temp(
        "slow.json",
        r#"{"groups": [
            {"n": 40, "S": [[1.0, 0.2], [0.2, 3.0]]},
            {"n": 25, "S": [[2.5, -0.4], [-0.4, 1.5]]}
        ]}"#,
    );
    let out = binary()
        .args(["estimate", path.to_str().unwrap(), "--max-iter", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout_of(&out).contains("converged: false"));
}

#[test]
fn test_identical_groups_statistic_zero() {
    let path = write_temp("identical2.json", IDENTICAL_GROUPS);
    let out = binary()
        .args(["test", path.to_str().unwrap(), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(doc["statistic"].as_f64().unwrap().abs() <= 1e-18);
    assert!(doc["p_value"].as_f64().unwrap() >= 1.0 - 1e-12);
}

#[test]
fn test_worked_example_statistic() {
    // equal sizes, second covariance twice the first: statistic 6.25 on
    // one degree of freedom
    let path = write_temp(
        "worked.json",
        r#"{"groups": [
            {"n": 50, "S": [[1.0, 0.0], [0.0, 1.0]]},
            {"n": 50, "S": [[2.0, 0.0], [0.0, 2.0]]}
        ]}"#,
    );
    let out = binary()
        .args(["test", path.to_str().unwrap(), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!((doc["statistic"].as_f64().unwrap() - 6.25).abs() <= 1e-9);
    assert_eq!(doc["df"].as_u64().unwrap(), 1);
    let expected_p = propcov::inference::chi_square_sf(6.25, 1).unwrap();
    assert!((doc["p_value"].as_f64().unwrap() - expected_p).abs() <= 1e-9);
}

#[test]
fn test_single_group_is_exit_5() {
    let path = write_temp("single.json", r#"{"groups": [{"n": 30, "S": [[1.0]]}]}"#);
    let out = binary().args(["test", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn csv_input_single_matrix() {
    let path = write_temp("single.csv", "1.0, 0.2\n0.2, 2.0\n");
    let out = binary()
        .args([
            "estimate",
            path.to_str().unwrap(),
            "--n",
            "40",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!((doc["sigma1"][1][1].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    // missing --n is a parse error
    let out = binary().args(["estimate", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_passes_and_reports_every_check() {
    let out = binary().args(["validate", "--format", "json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["all_passed"], serde_json::Value::Bool(true));
    assert!(doc["checks"].as_array().unwrap().len() >= 14);
}

#[test]
fn simulate_level_study_fixed_seed_is_byte_identical() {
    let config = write_temp(
        "level.json",
        r#"{
            "study": "level",
            "c": [1.0, 1.0],
            "sigma1": [[1.0, 0.0], [0.0, 1.0]],
            "group_sizes": [100, 100],
            "replications": 200,
            "seed": 5,
            "alpha": 0.05
        }"#,
    );
    let run = || {
        binary()
            .args([
                "simulate",
                config.to_str().unwrap(),
                "--seed",
                "11",
                "--format",
                "json",
            ])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first.status.code(), Some(0), "{}", stderr_of(&first));
    assert_eq!(first.stdout, second.stdout);

    // under the null the nominal level sits inside the reported
    // binomial confidence band
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&first)).unwrap();
    let rate = doc["rejection_rate"].as_f64().unwrap();
    let se = doc["rejection_se"].as_f64().unwrap();
    assert!(
        (rate - 0.05).abs() <= 1.96 * se,
        "nominal level outside the CI: rate {rate}, se {se}"
    );
}

#[test]
fn simulate_covariance_study_reports_masked_error() {
    let config = write_temp(
        "cov.json",
        r#"{
            "study": "covariance",
            "c": [1.0, 1.3],
            "sigma1": [[1.0, 0.3], [0.3, 1.0]],
            "group_sizes": [400, 400],
            "replications": 400,
            "seed": 9,
            "parametrization": "sigma"
        }"#,
    );
    let out = binary()
        .args(["simulate", config.to_str().unwrap(), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["failed_fits"].as_u64().unwrap(), 0);
    assert!(doc["masked_max_rel_error"].as_f64().unwrap() < 0.5);
    // overriding replications is reflected in the report
    let out = binary()
        .args([
            "simulate",
            config.to_str().unwrap(),
            "--reps",
            "150",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["replications"].as_u64().unwrap(), 150);
}

#[test]
fn json_reports_round_trip() {
    let path = write_temp("roundtrip.json", IDENTICAL_GROUPS);
    let out = binary()
        .args([
            "estimate",
            path.to_str().unwrap(),
            "--cov",
            "sigma",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    let text = stdout_of(&out);
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    // the 12-digit rounding policy makes emission idempotent
    let re_emitted = serde_json::to_string_pretty(&parsed).unwrap();
    assert_eq!(text.trim_end(), re_emitted);
}
