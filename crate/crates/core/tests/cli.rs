use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nested_sinkhorn::{fixtures, nested_exact, ScenarioTree};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nested-sinkhorn"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn three_stage_args(cmd: &str) -> Vec<String> {
    vec![
        cmd.to_string(),
        "--tree-a".into(),
        data("three_stage_left.json").display().to_string(),
        "--tree-b".into(),
        data("three_stage_right.json").display().to_string(),
    ]
}

fn run_owned(args: &[String]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Column `name` of the first data row of a CSV table.
fn cell(csv: &str, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == name).unwrap()].to_string()
}

#[test]
fn nested_matches_library() {
    let out = run_owned(&three_stage_args("nested"));
    assert!(out.status.success());
    let value: f64 = cell(&stdout(&out), "nd_w").parse().unwrap();
    let (a, b) = fixtures::three_stage_pair();
    let expected = nested_exact(&a, &b, 1.0).unwrap().value;
    assert!((value - expected).abs() < 1e-8 * expected);
}

#[test]
fn sinkhorn_on_information_pair_within_entropy_bound() {
    let out = run(&[
        "sinkhorn",
        "--tree-a",
        data("info_left.json").to_str().unwrap(),
        "--tree-b",
        data("info_right.json").to_str().unwrap(),
        "--lambda",
        "20",
    ]);
    assert!(out.status.success());
    let d_s: f64 = cell(&stdout(&out), "d_s").parse().unwrap();
    assert!(d_s >= 0.05 - 1e-9);
    assert!(d_s <= 0.05 + 2.0 * 2f64.ln() / 20.0);
}

#[test]
fn gen_writes_deterministic_tree() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.json"), dir.path().join("b.json")];
    for p in &paths {
        let out = run(&[
            "gen",
            "--branching",
            "1,2,3,2,3,4",
            "--seed",
            "7",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let summary = String::from_utf8(out.stderr).unwrap();
        assert_eq!(cell(&summary, "leaves"), "144");
    }
    let first = std::fs::read(&paths[0]).unwrap();
    assert_eq!(first, std::fs::read(&paths[1]).unwrap());
    let tree = ScenarioTree::from_path(&paths[0]).unwrap();
    assert_eq!(tree.leaves().len(), 144);
    assert_eq!(tree.height(), 5);
}

#[test]
fn json_output_schema() {
    let mut args = three_stage_args("nested-sinkhorn");
    args.extend([
        "--output".into(),
        "json".into(),
        "--lambda".into(),
        "5".into(),
    ]);
    let out = run_owned(&args);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["command"], "nested-sinkhorn");
    let columns = doc["columns"].as_array().unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].as_array().unwrap().len(), columns.len());
    assert_eq!(doc["rows"][0][7], true);
    assert_eq!(doc["rows"][0][6], "1;2;8");
}

#[test]
fn sweep_is_deterministic_apart_from_timings() {
    let mut args = three_stage_args("sweep");
    args.extend(["--lambdas".into(), "0.5,2,30".into()]);
    let strip = |out: Output| -> Vec<String> {
        assert!(out.status.success());
        stdout(&out)
            .lines()
            .map(|l| l.split(',').take(6).collect::<Vec<_>>().join(","))
            .collect()
    };
    let first = strip(run_owned(&args));
    assert_eq!(first.len(), 4);
    assert_eq!(first[0], "lambda,nd_s,nde_s,nd_w,iterations,converged");
    assert_eq!(first, strip(run_owned(&args)));
}

#[test]
fn verify_passes_on_reference_trees() {
    let mut args = three_stage_args("verify");
    args.extend(["--lambda".into(), "10".into()]);
    let out = run_owned(&args);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    for section in ["tower", "bounds", "equivalence", "martingale"] {
        assert!(text.contains(&format!("\n{section},")), "{section}");
    }
}

#[test]
fn out_flag_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let mut args = three_stage_args("wasserstein");
    args.extend(["--out".into(), path.display().to_string()]);
    let out = bin()
        .args(&args)
        .env("NESTED_SINKHORN_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("r,wasserstein,pivots,time_exact\n"));
}

#[test]
fn bench_reports_five_stages() {
    let out = run(&["bench", "--seed", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 6);
    assert!(text
        .starts_with("stages,leaves_a,leaves_b,nd_w,nd_s,nde_s,difference,converged,time_exact"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"nodes": [{"id": 0, "parent": null, "state": 1, "prob": 1},
        {"id": 1, "parent": 0, "state": 1, "prob": 0.5},
        {"id": 2, "parent": 0, "state": 1, "prob": 0.6}]}"#,
    )
    .unwrap();
    let out = run(&[
        "nested",
        "--tree-a",
        bad.to_str().unwrap(),
        "--tree-b",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("sum to 1.1"));

    assert_eq!(run(&["nested"]).status.code(), Some(2));
    assert_eq!(
        run(&["nested", "--tree-a", "/nonexistent.json", "--tree-b", "/x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--branching", "2,2"]).status.code(), Some(2));

    let mut args = three_stage_args("nested-sinkhorn");
    args.extend(["--lambda".into(), "-1".into()]);
    assert_eq!(run_owned(&args).status.code(), Some(2));

    let mismatch = run(&[
        "nested",
        "--tree-a",
        data("info_left.json").to_str().unwrap(),
        "--tree-b",
        data("three_stage_left.json").to_str().unwrap(),
    ]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn unconverged_exits_with_one_and_a_diagnostic_row() {
    let mut args = three_stage_args("nested-sinkhorn");
    args.extend([
        "--max-iter".into(),
        "1".into(),
        "--tol".into(),
        "1e-14".into(),
    ]);
    let out = run_owned(&args);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(cell(&stdout(&out), "converged"), "false");
}
