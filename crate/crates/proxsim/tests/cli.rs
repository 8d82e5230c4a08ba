//! End-to-end checks of the `proxsim` binary: flag validation, exit
//! codes, output formats, and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn proxsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxsim"))
        .args(args)
        .output()
        .expect("failed to launch proxsim")
}

fn stdout_of(args: &[&str]) -> String {
    let out = proxsim(args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn happy_path_simulate_parses() {
    let text = stdout_of(&[
        "simulate", "--size", "16", "--density", "1", "--p", "0.5", "--q", "0.05", "--seed",
        "42", "--steps", "50",
    ]);
    assert!(text.starts_with("# proxsim"));
    assert!(text.contains("# master_seed = 42"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 50);
    // stdout carries nothing but the header comments and CSV
    for line in text.lines() {
        assert!(line.starts_with('#') || line.contains(',') || line == "tick,f");
    }
}

#[test]
fn out_of_range_probability_is_a_usage_error_naming_the_flag() {
    let out = proxsim(&["simulate", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--p"), "stderr: {stderr}");
    assert!(stderr.contains("[0, 1]"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = proxsim(&["simulate", "--frobnicate", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let out = proxsim(&["acor", "/nonexistent/trajectory.csv"]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/trajectory.csv"), "stderr: {stderr}");
}

#[test]
fn unwritable_output_path_is_an_io_error() {
    let out = proxsim(&[
        "meanfield", "--p", "0.5", "--out", "/nonexistent-dir/q0.csv",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent-dir/q0.csv"), "stderr: {stderr}");
}

#[test]
fn constant_series_analysis_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    std::fs::write(&path, format!("f\n{}", "0.5\n".repeat(200))).unwrap();
    let out = proxsim(&["acor", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("constant"), "stderr: {stderr}");
}

#[test]
fn meanfield_solver_row_matches_theory() {
    let text = stdout_of(&["meanfield", "--p", "0.5", "--q", "0.2", "--density", "1"]);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    let fields: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(fields[0], "0.5");
    assert_eq!(fields[1], "0.2");
    assert_eq!(fields[2], "1");
    let f_mf: f64 = fields[3].parse().unwrap();
    assert!(f_mf > 0.0 && f_mf < 1.0);
    assert_eq!(fields[4], "epidemic"); // q = 0.2 < q0 ≈ 0.409
    let residual: f64 = fields[5].parse().unwrap();
    assert!(residual <= 1e-10);
}

#[test]
fn meanfield_threshold_curve_covers_the_grid() {
    let text = stdout_of(&["meanfield", "--p", "0.1:0.9:0.1", "--density", "0.5,1"]);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 18);
    assert_eq!(text.lines().find(|l| !l.starts_with('#')).unwrap(), "p,d,q0");
    // spot value: q0(0.5, 1) = ln 2 / (1 + ln 2)
    let spot = rows.iter().find(|r| r.starts_with("0.5,1,")).unwrap();
    let q0: f64 = spot.rsplit(',').next().unwrap().parse().unwrap();
    assert!((q0 - 0.40938).abs() < 1e-4);
}

#[test]
fn sweep_density_grid_expands_ranges_and_lists() {
    let text = stdout_of(&[
        "sweep", "--p", "0.5", "--q", "1", "--density", "0.1:1:0.1,2,5,10", "--size", "8",
        "--steps", "120", "--replicates", "2", "--seed", "9",
    ]);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 13, "13 densities expected:\n{text}");
    let densities: Vec<&str> =
        rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(
        densities,
        vec!["0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1", "2", "5", "10"]
    );
}

#[test]
fn simulate_and_acor_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let run = proxsim(&[
        "simulate", "--size", "16", "--density", "1", "--p", "0.6", "--q", "0.05", "--steps",
        "400", "--seed", "31", "--out", traj.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let text = stdout_of(&["acor", traj.to_str().unwrap()]);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    let fields: Vec<&str> = rows[0].split(',').collect();
    // p,q,d,L,seed echoed from the trajectory header
    assert_eq!(fields[0], "0.6");
    assert_eq!(fields[1], "0.05");
    assert_eq!(fields[2], "1");
    assert_eq!(fields[3], "16");
    assert_eq!(fields[4], "31");
    let tau: f64 = fields[5].parse().unwrap();
    assert!(tau.is_finite() && tau >= 0.5);
}

#[test]
fn identical_flags_give_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, _) in [(&a, 0), (&b, 1)] {
        let out = proxsim(&[
            "simulate", "--size", "32", "--density", "1", "--p", "0.5", "--q", "0.05",
            "--steps", "500", "--seed", "42", "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_files_equal(&a, &b);
}

fn assert_files_equal(a: &Path, b: &Path) {
    let ca = std::fs::read(a).unwrap();
    let cb = std::fs::read(b).unwrap();
    assert!(ca == cb, "{} and {} differ", a.display(), b.display());
}

#[test]
fn thinning_keeps_every_kth_tick() {
    let text = stdout_of(&[
        "simulate", "--size", "8", "--density", "1", "--steps", "100", "--seed", "4", "--thin",
        "10",
    ]);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    assert!(rows[0].starts_with("10,"));
    assert!(rows[9].starts_with("100,"));
}

#[test]
fn recorded_command_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let out = proxsim(&[
        "simulate", "--size", "16", "--p", "0.4", "--steps", "200", "--seed", "8", "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&first).unwrap();
    let command_line = text
        .lines()
        .find(|l| l.starts_with("# command: "))
        .unwrap()
        .trim_start_matches("# command: ");
    let mut args: Vec<&str> = command_line.split_whitespace().collect();
    assert_eq!(args.remove(0), "proxsim");
    // the recorded command streams the same bytes to stdout
    let rerun = proxsim(&args);
    assert!(rerun.status.success(), "recorded command failed: {command_line}");
    assert_eq!(text.as_bytes(), &rerun.stdout[..], "recorded command did not reproduce the file");
}
