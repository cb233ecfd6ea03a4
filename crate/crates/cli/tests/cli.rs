//! End-to-end subcommand behavior through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_procal")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/sample_stream.jsonl")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let output = run(args);
    assert!(
        output.status.success(),
        "procal {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).to_string()
}

#[test]
fn neutral_only_grid_reproduces_the_input_stream() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = dir.path().join("out.jsonl");
    // Magnitude 0 collapses every offset onto the all-zero one, so with
    // betas = {1} the grid holds only the neutral calibrator.
    run_ok(&[
        "calibrate",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--betas",
        "1",
        "--alpha-magnitudes",
        "0",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let p = record["p"].as_array().unwrap();
        let protected = record["p_protected"].as_array().unwrap();
        for (a, b) in p.iter().zip(protected) {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn csv_pipeline_round_trips() {
    let dir = tempfile::TempDir::new().unwrap();
    let stream = dir.path().join("stream.csv");
    run_ok(&[
        "simulate",
        "--scenario",
        "x_imbalance",
        "--model",
        "gnb",
        "--k",
        "3",
        "--n-train",
        "300",
        "--n-test",
        "200",
        "--tail",
        "100",
        "--seed",
        "9",
        "--output",
        stream.to_str().unwrap(),
    ]);
    let header = std::fs::read_to_string(&stream).unwrap();
    assert!(header.starts_with("p_0,p_1,p_2,y"));

    let out = dir.path().join("out.csv");
    let stdout = run_ok(&[
        "calibrate",
        "--input",
        stream.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("protected"));
    let out_text = std::fs::read_to_string(&out).unwrap();
    assert!(out_text.starts_with("p_0,p_1,p_2,y,p_protected_0,p_protected_1,p_protected_2"));
    // AUC column is absent for a 3-class stream.
    assert!(stdout.contains("-"));
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "pi = 0.25\nece_bins = 5\nece_norm = l1\n").unwrap();
    let out = dir.path().join("out.jsonl");
    let report = dir.path().join("report.json");
    run_ok(&[
        "calibrate",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--ece-bins",
        "7",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["config"]["pi"], 0.25);
    assert_eq!(report["config"]["ece_bins"], 7); // flag wins
    assert_eq!(report["config"]["ece_norm"], "l1");
    let bound = report["protection_cost_bound"].as_f64().unwrap();
    assert!((bound - 4.0f64.ln()).abs() < 1e-12);
}

#[test]
fn weights_trajectory_has_one_row_per_component_per_step() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = dir.path().join("out.jsonl");
    let weights = dir.path().join("weights.csv");
    run_ok(&[
        "calibrate",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--weights-out",
        weights.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(&weights).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        &csv::StringRecord::from(vec![
            "step",
            "component",
            "jump_rate",
            "theta_index",
            "theta",
            "weight"
        ])
    );
    // 200 steps x (1 base + 3 jump rates x 9 calibrators), each step's
    // weights summing to 1.
    let mut rows = 0usize;
    let mut per_step = std::collections::BTreeMap::<u64, f64>::new();
    for row in reader.records() {
        let row = row.unwrap();
        rows += 1;
        let step: u64 = row[0].parse().unwrap();
        let weight: f64 = row[5].parse().unwrap();
        *per_step.entry(step).or_insert(0.0) += weight;
    }
    assert_eq!(rows, 200 * (1 + 3 * 9));
    for (step, total) in per_step {
        assert!((total - 1.0).abs() <= 1e-9, "step {step}: mass {total}");
    }
}

#[test]
fn experiment_grid_has_the_full_combinatorial_shape() {
    let dir = tempfile::TempDir::new().unwrap();
    let table = dir.path().join("table.csv");
    run_ok(&[
        "experiment",
        "--scenarios",
        "unperturbed,concept_shift",
        "--models",
        "logistic,gnb",
        "--baselines",
        "platt,temperature,isotonic",
        "--seeds",
        "2",
        "--n-train",
        "300",
        "--n-test",
        "200",
        "--tail",
        "100",
        "--output",
        table.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "scenario,classifier,calibrator,protected,metric,mean,seed_0,seed_1"
    );
    let mut cells = std::collections::BTreeSet::new();
    let mut metrics = std::collections::BTreeSet::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        cells.insert(fields[..4].join(","));
        metrics.insert(fields[4].to_string());
    }
    // 2 scenarios x 2 models x {base + 3 baselines} x {standard, protected}.
    assert_eq!(cells.len(), 2 * 2 * 4 * 2);
    for metric in ["log_loss", "brier", "ece", "accuracy", "auc"] {
        assert!(metrics.contains(metric), "missing metric {metric}");
    }
}

#[test]
fn experiment_rejects_multiclass_concept_shift() {
    let dir = tempfile::TempDir::new().unwrap();
    let table = dir.path().join("table.csv");
    let output = run(&[
        "experiment",
        "--scenarios",
        "concept_shift",
        "--models",
        "logistic",
        "--k",
        "3",
        "--n-train",
        "300",
        "--n-test",
        "200",
        "--tail",
        "100",
        "--seeds",
        "1",
        "--output",
        table.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("binary"), "stderr: {stderr}");
}

#[test]
fn oracle_check_command_reports_battery() {
    let stdout = run_ok(&["oracle-check", "--instances", "25", "--seed", "3"]);
    assert!(stdout.contains("25/25"), "stdout: {stdout}");
}

#[test]
fn unknown_extension_requires_format_flag() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = dir.path().join("out.weird");
    let output = run(&[
        "calibrate",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--format"));

    run_ok(&[
        "calibrate",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--output-format",
        "jsonl",
    ]);
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = tempfile::TempDir::new().unwrap();
    let input = dir.path().join("bad.jsonl");
    std::fs::write(
        &input,
        "{\"p\":[0.8,0.2],\"y\":0}\n{\"p\":[0.8,0.2,0.0],\"y\":0}\n",
    )
    .unwrap();
    let out = dir.path().join("out.jsonl");
    let output = run(&[
        "calibrate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":2:"), "stderr: {stderr}");
}

#[test]
fn prequential_halt_requires_snapshot_flag() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = dir.path().join("out.jsonl");
    let output = run(&[
        "prequential",
        "--input",
        fixture().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--halt-after",
        "10",
    ]);
    // Usage error: --halt-after without --snapshot-out.
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    let output = run(&["simulate", "--scenario", "nonsense", "--output", "x.jsonl"]);
    assert_eq!(output.status.code(), Some(2));
    let output = run(&["calibrate", "--input", "a.jsonl", "--output", "b.jsonl", "--ece-norm", "l3"]);
    assert_eq!(output.status.code(), Some(2));
}
