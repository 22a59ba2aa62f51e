//! End-to-end tests of the jitmed binary: output schemas, determinism,
//! error codes.

use std::io::Write;
use std::process::{Command, Output};

use jitmed::rng::Stream;
use jitmed::simulation::poisson_sampler;

fn jitmed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jitmed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = jitmed(args);
    assert!(
        out.status.success(),
        "jitmed {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    jitmed(args).status.code().expect("no signal")
}

fn write_counts(lines: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(lines.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

/// Parse one named column from CSV output.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("column {name} in {header:?}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn theory_h_at_zero() {
    let out = stdout_of(&["theory", "h", "--x", "0"]);
    let h: f64 = column(&out, "h")[0].parse().unwrap();
    assert!((h - 4.0 / 135.0).abs() < 1e-15);
}

#[test]
fn theory_median_at_one_is_e_over_two() {
    let out = stdout_of(&["theory", "median", "--lambda", "1"]);
    let m: f64 = column(&out, "median")[0].parse().unwrap();
    let d: f64 = column(&out, "delta")[0].parse().unwrap();
    assert!((m - std::f64::consts::E / 2.0).abs() < 1e-14);
    assert!((d - 0.0258).abs() < 1e-4);
}

#[test]
fn theory_median_grid_has_inclusive_endpoints() {
    let out = stdout_of(&["theory", "median", "--grid", "10:20:0.1"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 102); // header + 101 rates
    assert!(rows[1].starts_with("10,"));
    assert!(rows[101].starts_with("20,"));
}

#[test]
fn theory_wn_row_shape() {
    let out = stdout_of(&["theory", "wn", "--n", "1", "--x", "0", "--k", "0"]);
    let w: f64 = column(&out, "w")[0].parse().unwrap();
    assert!((w - 4.0 / 3.0 * (-1.0f64).exp()).abs() < 1e-12);
    assert_eq!(column(&out, "branch")[0], "low");
}

#[test]
fn theory_residual_sweep_decreases() {
    let out = stdout_of(&[
        "theory", "residual", "--x", "0", "--k", "0", "--n-sweep", "100,1000,10000",
    ]);
    let res: Vec<f64> = column(&out, "residual")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(res.len(), 3);
    assert!(res[2].abs() < res[1].abs() && res[1].abs() < res[0].abs());
}

#[test]
fn theory_rejects_out_of_domain_x() {
    assert_eq!(exit_code(&["theory", "h", "--x", "1.5"]), 2);
}

#[test]
fn estimate_mle_small_file() {
    let f = write_counts("2\n3\n4\n");
    let out = stdout_of(&["estimate", "--input", f.path().to_str().unwrap(), "--method", "mle"]);
    assert_eq!(column(&out, "value")[0], "3");
    assert_eq!(column(&out, "n")[0], "3");
}

#[test]
fn estimate_accepts_csv_header() {
    let f = write_counts("count\n2\n3\n4\n");
    let out = stdout_of(&["estimate", "--input", f.path().to_str().unwrap(), "--method", "mle"]);
    assert_eq!(column(&out, "value")[0], "3");
}

#[test]
fn estimate_jittered_is_reproducible() {
    let f = write_counts("5\n6\n7\n8\n9\n");
    let args = [
        "estimate",
        "--input",
        f.path().to_str().unwrap(),
        "--method",
        "jittered",
        "--seed",
        "31337",
    ];
    assert_eq!(stdout_of(&args), stdout_of(&args));
}

#[test]
fn estimate_input_error_codes() {
    assert_eq!(
        exit_code(&["estimate", "--input", "/does/not/exist", "--method", "mle"]),
        3
    );
    let negative = write_counts("1\n-2\n3\n");
    assert_eq!(
        exit_code(&["estimate", "--input", negative.path().to_str().unwrap(), "--method", "mle"]),
        3
    );
    let fractional = write_counts("1\n2.5\n");
    assert_eq!(
        exit_code(&["estimate", "--input", fractional.path().to_str().unwrap(), "--method", "mle"]),
        3
    );
    let empty = write_counts("");
    assert_eq!(
        exit_code(&["estimate", "--input", empty.path().to_str().unwrap(), "--method", "mle"]),
        3
    );
    let header_only = write_counts("count\n");
    assert_eq!(
        exit_code(&["estimate", "--input", header_only.path().to_str().unwrap(), "--method", "mle"]),
        3
    );
}

#[test]
fn estimate_usage_error_codes() {
    let f = write_counts("1\n");
    assert_eq!(
        exit_code(&["estimate", "--input", f.path().to_str().unwrap(), "--method", "bogus"]),
        2
    );
    assert_eq!(exit_code(&["estimate", "--method", "mle"]), 2);
}

#[test]
fn estimate_tukey_honors_cutoff_flag() {
    let mut body = String::new();
    let mut stream = Stream::new(404);
    for _ in 0..200 {
        body.push_str(&poisson_sampler(5.0, &mut stream).to_string());
        body.push('\n');
    }
    let f = write_counts(&body);
    let out = stdout_of(&[
        "estimate", "--input", f.path().to_str().unwrap(), "--method", "tukey", "--tukey-k",
        "4", "--seed", "1",
    ]);
    let v: f64 = column(&out, "value")[0].parse().unwrap();
    assert!((v - 5.0).abs() < 1.0);
    let iters: u32 = column(&out, "iterations")[0].parse().unwrap();
    assert!(iters >= 1);
}

#[test]
fn theory_wn_branch_change_leaves_delta_empty() {
    // x + k/(n+x) crosses 2/3 between n = 10 and 11, so the rescaled
    // difference is undefined and its cell stays empty.
    let out = stdout_of(&["theory", "wn", "--n", "10", "--x", "0.6", "--k", "0.72"]);
    assert_eq!(column(&out, "delta_n")[0], "");
    assert_eq!(column(&out, "branch")[0], "high");
}

#[test]
fn estimate_tukey_all_zero_is_numeric_failure() {
    let f = write_counts("0\n0\n0\n");
    assert_eq!(
        exit_code(&["estimate", "--input", f.path().to_str().unwrap(), "--method", "tukey"]),
        4
    );
}

#[test]
fn estimate_recovers_the_rate_at_scale() {
    let mut stream = Stream::new(70707);
    let mut body = String::new();
    for _ in 0..100_000 {
        body.push_str(&poisson_sampler(7.0, &mut stream).to_string());
        body.push('\n');
    }
    let f = write_counts(&body);
    let out = stdout_of(&[
        "estimate",
        "--input",
        f.path().to_str().unwrap(),
        "--method",
        "jittered",
        "--seed",
        "5",
    ]);
    let v: f64 = column(&out, "value")[0].parse().unwrap();
    assert!((v - 7.0).abs() <= 0.05, "estimate {v}");
    let se: f64 = column(&out, "std_error")[0].parse().unwrap();
    assert!(se > 0.0 && se < 0.05);
}

#[test]
fn simulate_single_row_shape() {
    let out = stdout_of(&[
        "simulate", "--lambdas", "5", "--n", "50", "--reps", "100", "--estimators", "mle",
        "--seed", "1",
    ]);
    assert_eq!(out.lines().count(), 2);
    assert!(out.starts_with(
        "lambda,estimator,bias,rmse,mean_estimate,reps_used,qq_slope,qq_intercept,wall_time_s,sqrt_h"
    ));
    assert_eq!(column(&out, "reps_used")[0], "100");
}

#[test]
fn simulate_derives_outlier_shift_from_snr() {
    let out = stdout_of(&[
        "simulate", "--lambdas", "5", "--n", "20", "--reps", "10", "--pi", "0.1", "--snr",
        "-10", "--estimators", "mle", "--seed", "1",
    ]);
    assert_eq!(column(&out, "sqrt_h")[0], "24");
}

#[test]
fn simulate_reproducible_apart_from_wall_time() {
    let args = [
        "simulate", "--lambdas", "2,3", "--n", "40", "--reps", "50", "--estimators",
        "jittered,mle", "--seed", "99",
    ];
    let strip = |out: String| -> Vec<Vec<String>> {
        out.lines()
            .skip(1)
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| *i != 8) // wall_time_s is measured
                    .map(|(_, c)| c.to_string())
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip(stdout_of(&args)), strip(stdout_of(&args)));
}

#[test]
fn simulate_contamination_flag_validation() {
    assert_eq!(
        exit_code(&["simulate", "--lambdas", "5", "--reps", "5", "--pi", "0.1"]),
        2
    );
    assert_eq!(
        exit_code(&[
            "simulate", "--lambdas", "5", "--reps", "5", "--pi", "0.1", "--snr", "-10",
            "--sqrt-h", "3",
        ]),
        2
    );
}

#[test]
fn simulate_respects_thread_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_jitmed"))
        .env("JITMED_THREADS", "2")
        .args(["simulate", "--lambdas", "4", "--n", "20", "--reps", "20", "--estimators", "mle", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn bench_matrix_and_star_floor() {
    let out = stdout_of(&[
        "bench", "--sizes", "1e3,1e4", "--reps", "1", "--methods", "mle,median", "--seed", "1",
        "--star-floor",
    ]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "method,1000,10000");
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[1], "0*"); // sub-0.05 s cells under the floor flag
    }
}

#[test]
fn bench_emits_na_over_budget_and_exits_zero() {
    let out = jitmed(&[
        "bench", "--sizes", "1e4", "--reps", "1", "--methods", "tukey", "--memory-budget-gb",
        "0.00001", "--seed", "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",NA"));
}

#[test]
fn bench_rejects_unsorted_sizes() {
    assert_eq!(exit_code(&["bench", "--sizes", "1e4,1e3", "--reps", "1"]), 2);
}

#[test]
fn csv_numbers_round_trip() {
    let out = stdout_of(&["theory", "median", "--lambda", "7.25"]);
    let row = out.lines().nth(1).unwrap();
    for cell in row.split(',') {
        let v: f64 = cell.parse().unwrap();
        assert_eq!(v.to_string(), cell, "cell {cell} not shortest round-trip");
    }
}

#[test]
fn json_envelope_schema() {
    let out = stdout_of(&["--format", "json", "theory", "h", "--x", "0.5"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["schema_version"], "1");
    assert_eq!(doc["command"], "theory.h");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0]["h"].as_f64().unwrap() - (-1.0 / 24.0 + 4.0 / 135.0)).abs() < 1e-15);

    let est = write_counts("1\n2\n");
    let out = stdout_of(&[
        "--format", "json", "estimate", "--input", est.path().to_str().unwrap(), "--method",
        "median",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["rows"][0]["value"], 1.5);
    assert!(doc["rows"][0]["std_error"].is_null());
}
