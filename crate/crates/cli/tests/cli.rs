use std::process::{Command, Output};

use serde_json::Value;

fn qmark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmark"))
        .args(args)
        .env_remove("QMARK_MAX_SB_LEVEL")
        .env_remove("QMARK_MAX_INTERVALS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = qmark(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn verify_small_suite_exits_zero_with_table() {
    let out = qmark(&["verify", "--max-level", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("interval measure 2^-n"));
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn verify_json_reports_every_check() {
    let v = json(&["--format", "json", "verify", "--max-level", "8"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["failures"] == 0));
    assert!(checks.len() >= 10);
}

#[test]
fn lambda_star_emits_exact_bound_and_ceiling() {
    let v = json(&["lambda-star", "--n", "1000", "--alpha", "1/10"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "lambda-star");
    assert_eq!(v["chain_holds"], true);
    assert_eq!(v["ceiling"]["exact"], "25/1001");
    assert_eq!(v["half_census_count"], 12);
    let lower: f64 = v["lower"]["decimal"].as_str().unwrap().parse().unwrap();
    assert!(lower > 0.99 && lower < 1.0);
    let exact = v["lower"]["exact"].as_str().unwrap();
    assert!(exact.contains('/'));
}

#[test]
fn decimal_alpha_is_read_exactly() {
    let a = stdout(&qmark(&["census", "--n", "40", "--alpha", "0.05"]));
    let b = stdout(&qmark(&["census", "--n", "40", "--alpha", "1/20"]));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["alpha"]["exact"], "1/20");
    assert_eq!(v["count"], 12);
}

#[test]
fn census_csv_lists_large_words() {
    let out = qmark(&["--format", "csv", "census", "--n", "10", "--alpha", "1/5"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("word,theta,left,right,length,length_decimal")
    );
    let words: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        words,
        ["0000000000", "0111111111", "1000000000", "1111111111"]
    );
}

#[test]
fn pipeline_reports_the_constructive_bound() {
    let v = json(&["pipeline", "--alpha", "1/5"]);
    assert_eq!(v["n1"], 2);
    assert_eq!(v["n3"], 5);
    assert_eq!(v["l_bound"], 4);
    assert_eq!(v["f_left"], serde_json::json!(["00", "10"]));
}

#[test]
fn eval_and_invert_are_inverse() {
    let v = json(&["eval", "--x", "2/5"]);
    assert_eq!(v["value"]["exact"], "3/2^3");
    assert_eq!(v["value"]["decimal"], "0.375");
    assert_eq!(v["continued_fraction"], serde_json::json!([2, 2]));
    let w = json(&["invert", "--y", "3/2^3"]);
    assert_eq!(w["x"]["exact"], "2/5");
    let w = json(&["invert", "--y", "0.375"]);
    assert_eq!(w["x"]["exact"], "2/5");
}

#[test]
fn eval_real_sums_the_series() {
    let v = json(&["eval", "--x", "0.5", "--real"]);
    assert_eq!(v["value"]["decimal"], "0.5");
}

#[test]
fn partition_csv_rows_follow_theta_order() {
    let out = qmark(&["partition", "--level", "2", "--format", "csv"]);
    assert_eq!(
        stdout(&out),
        "word,theta,left,right,length,length_decimal,measure\n\
         00,0,0/1,1/3,1/3,0.33333333333333333,1/2^2\n\
         01,1,1/3,1/2,1/6,0.16666666666666667,1/2^2\n\
         10,2,1/2,2/3,1/6,0.16666666666666667,1/2^2\n\
         11,3,2/3,1/1,1/3,0.33333333333333333,1/2^2\n"
    );
}

#[test]
fn partition_json_is_valid_and_complete() {
    let v = json(&["partition", "--level", "6"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 64);
    assert_eq!(rows[63]["right"]["exact"], "1/1");
    for pair in rows.windows(2) {
        assert_eq!(pair[0]["right"], pair[1]["left"]);
    }
}

#[test]
fn jacobi_truncates_to_resolved_coefficients() {
    let v = json(&["jacobi", "--level", "12", "--count", "10"]);
    let honest = v["honest_count"].as_u64().unwrap() as usize;
    assert_eq!(v["rows"].as_array().unwrap().len(), honest);
    let v = json(&["jacobi", "--level", "12", "--count", "10", "--no-truncate"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn jacobi_csv_columns() {
    let out = qmark(&[
        "--format",
        "csv",
        "jacobi",
        "--adaptive",
        "1e-2",
        "--count",
        "5",
        "--tol",
        "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,a_j,b_j,geo_mean_j"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    // symmetric measure: a_1 = 1/2
    assert!((first[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn dimension_coarse_tolerance() {
    let v = json(&["dimension", "--eps", "1e-4"]);
    let value: f64 = v["value"].as_str().unwrap().parse().unwrap();
    let bound: f64 = v["error_bound"].as_str().unwrap().parse().unwrap();
    assert!(bound <= 1e-4);
    assert!((value - 0.87471630510821).abs() <= bound);
}

#[test]
fn unreachable_tolerance_exits_one() {
    let out = qmark(&["dimension", "--eps", "1e-9", "--max-intervals", "1000"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        &["census", "--n", "10", "--alpha", "0"][..],
        &["census", "--n", "10", "--alpha", "-1/2"],
        &["census", "--n", "10", "--alpha", "1/2", "--bogus"],
        &["census", "--n", "0", "--alpha", "1/2"],
        &["lambda-star", "--n", "10", "--alpha", "x"],
        &["--format", "csv", "pipeline", "--alpha", "1/2"],
        &["--format", "table", "census", "--n", "5", "--alpha", "1/2"],
        &["dimension", "--eps", "0"],
        &["eval", "--x", "3/2"],
        &["invert", "--y", "1/3"],
        &["partition", "--level", "1000"],
        &["jacobi", "--level", "3", "--count", "20"],
        &["--threads", "0", "verify"],
        &["frobnicate"],
    ] {
        assert_eq!(qmark(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = |t: &'static str| ["--threads", t, "census", "--n", "300", "--alpha", "1/20"];
    let one = qmark(&args("1"));
    let again = qmark(&args("1"));
    let four = qmark(&args("4"));
    assert_eq!(one.stdout, again.stdout);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("qmark-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pipeline.json");
    let out = qmark(&[
        "pipeline",
        "--alpha",
        "1/2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["l_bound"], 2);
    std::fs::remove_dir_all(&dir).unwrap();
}
