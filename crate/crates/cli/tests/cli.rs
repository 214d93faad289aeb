//! End-to-end runs of the compiled binary: config handling, report file
//! schemas, exit codes, and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsigma"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.conf");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const FAST: &str = "n = 800\nstep = 0.015625\n";

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "samples = 10\n");
    let out = run(&["verify", "--config", &conf]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("samples"), "stderr: {err}");
}

#[test]
fn unknown_identity_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "identities = not_a_check\n");
    let out = run(&["verify", "--config", &conf]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_check"));
}

#[test]
fn empty_identity_list_is_a_successful_noop() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "identities =\n");
    let outdir = dir.path().join("reports");
    let out = run(&["verify", "--config", &conf, "--out", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(&outdir).unwrap().collect();
    assert!(files.is_empty());
}

#[test]
fn verify_writes_csv_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FAST}identities = class_d_projection\n"));
    let outdir = dir.path().join("reports");
    let out = run(&["verify", "--config", &conf, "--out", outdir.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("class_d_projection.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "identity_id,lhs_mean,lhs_stderr,rhs_mean,rhs_stderr,z,bias_budget,n,seed,verdict"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "class_d_projection");
    assert_eq!(row[9], "PASS");
    assert_eq!(row[7], "800");
}

#[test]
fn json_reports_round_trip_with_matching_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FAST}identities = class_d_projection\n"));
    let csv_dir = dir.path().join("csv");
    let json_dir = dir.path().join("json");
    let a = run(&["verify", "--config", &conf, "--out", csv_dir.to_str().unwrap()]);
    let b = run(&[
        "verify", "--config", &conf, "--out", json_dir.to_str().unwrap(), "--format", "json",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let csv = std::fs::read_to_string(csv_dir.join("class_d_projection.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let json = std::fs::read_to_string(json_dir.join("class_d_projection.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(json.trim()).unwrap();
    assert_eq!(v["identity_id"].as_str().unwrap(), row[0]);
    assert_eq!(v["lhs_mean"].as_f64().unwrap(), row[1].parse::<f64>().unwrap());
    assert_eq!(v["z"].as_f64().unwrap(), row[5].parse::<f64>().unwrap());
    assert_eq!(v["verdict"].as_str().unwrap(), row[9]);
}

#[test]
fn same_config_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FAST}identities = doob_signed_difference\n"));
    let d1 = dir.path().join("r1");
    let d2 = dir.path().join("r2");
    run(&["verify", "--config", &conf, "--out", d1.to_str().unwrap()]);
    run(&["verify", "--config", &conf, "--out", d2.to_str().unwrap()]);
    let a = std::fs::read(d1.join("doob_signed_difference.csv")).unwrap();
    let b = std::fs::read(d2.join("doob_signed_difference.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FAST}identities = ainf_image_absbm\nseed = 1\n"));
    let outdir = dir.path().join("reports");
    let out = run(&["verify", "--config", &conf, "--out", outdir.to_str().unwrap(), "--seed", "77", "--samples", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(outdir.join("ainf_image_absbm.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "500");
    assert_eq!(row[8], "77");
}

#[test]
fn failing_identity_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FAST}identities = mutation_drop_window\n"));
    let out = run(&["verify", "--config", &conf, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn price_subcommand_reports_the_pricing_identity() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("reports");
    let out = run(&["price", "--samples", "1500", "--seed", "3", "--out", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(outdir.join("pricing_put_vs_lastpassage.csv").exists());
    assert!(outdir.join("pricing_conditional.csv").exists());
}

#[test]
fn azema_subcommand_runs_its_three_checks() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), FAST);
    let outdir = dir.path().join("reports");
    let out = run(&["azema", "--config", &conf, "--seed", "5", "--out", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for id in ["azema_identity_const", "azema_identity_window", "azema_slope"] {
        assert!(outdir.join(format!("{id}.csv")).exists(), "{id}");
    }
}

#[test]
fn simulate_dumps_a_time_value_path() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "model = absbm\nstep = 0.0625\nhorizon = 1.0\n");
    let outdir = dir.path().join("paths");
    let out = run(&["simulate", "--config", &conf, "--out", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("path.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "time,value");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 17);
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.0);
    for row in &rows {
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v >= 0.0);
    }
}

#[test]
fn bad_model_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "model = heston\n");
    let out = run(&["simulate", "--config", &conf]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heston"));
}
