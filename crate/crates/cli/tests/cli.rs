//! End-to-end tests of the `lru-irm` binary: table contents, round-trip
//! encoding, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lru-irm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

/// Parses the named float column from CSV output (skipping `#` footers).
fn csv_column(text: &str, column: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let idx = header
        .iter()
        .position(|&h| h == column)
        .unwrap_or_else(|| panic!("column {column} in {header:?}"));
    lines
        .map(|line| {
            line.split(',').nth(idx).unwrap().parse::<f64>().unwrap()
        })
        .collect()
}

fn csv_meta(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    text.lines()
        .find_map(|line| line.strip_prefix(&prefix).map(str::to_string))
}

#[test]
fn hitrate_two_items() {
    let output = run(&["hitrate", "--p", "0.7,0.3", "--capacity", "1", "--brute-force"]);
    assert!(output.status.success());
    let text = stdout(&output);
    let values = csv_column(&text, "hit_rate");
    assert_eq!(values.len(), 3);
    for value in values {
        assert!((value - 0.58).abs() < 1e-12, "{text}");
    }
}

#[test]
fn uniform_sweep_has_zero_derivatives() {
    let output = run(&[
        "sweep",
        "--q",
        "uniform",
        "--n",
        "4",
        "--capacity",
        "2",
        "--grid",
        "0,0.5,1",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    for column in ["derivative", "master_derivative"] {
        for value in csv_column(&text, column) {
            assert!(value.abs() < 1e-10, "{column}: {value}");
        }
    }
    for value in csv_column(&text, "hit_rate") {
        assert!((value - 0.5).abs() < 1e-12);
    }
}

#[test]
fn sweep_is_strictly_increasing_for_nonuniform_rays() {
    let output = run(&[
        "sweep",
        "--q",
        "0.5,0.3,0.2",
        "--capacity",
        "2",
        "--grid",
        "0,0.25,0.5,0.75,1",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let hit = csv_column(&text, "hit_rate");
    for pair in hit.windows(2) {
        assert!(pair[1] > pair[0], "{hit:?}");
    }
    let derivative = csv_column(&text, "derivative");
    let master = csv_column(&text, "master_derivative");
    assert_eq!(derivative[0], 0.0);
    for (d, m) in derivative.iter().zip(&master).skip(1) {
        assert!(*d > 0.0);
        assert!((d - m).abs() < 1e-7, "kernel {d} vs master {m}");
    }
}

#[test]
fn searchcost_round_trips_exactly() {
    let output = run(&["searchcost", "--p", "0.5,0.3,0.2"]);
    assert!(output.status.success());
    let text = stdout(&output);
    let cdf = csv_column(&text, "cdf");
    // Re-encode what we parsed: 17 significant digits must round-trip.
    let p = lru_irm::PopularityVector::new(&[0.5, 0.3, 0.2]).unwrap();
    let exact = lru_irm::search_cost_distribution(&p).unwrap();
    for (parsed, expected) in cdf.iter().zip(&exact.cdf) {
        assert_eq!(parsed.to_bits(), expected.to_bits());
    }
    let mean: f64 = csv_meta(&text, "expected_cost").unwrap().parse().unwrap();
    assert_eq!(mean.to_bits(), exact.mean().to_bits());
}

#[test]
fn kernel_table_matches_split() {
    let output = run(&["kernel", "--p", "0.4,0.35,0.25", "--capacity", "1"]);
    assert!(output.status.success());
    let text = stdout(&output);
    let k = csv_column(&text, "k");
    let phi = csv_column(&text, "phi");
    let psi = csv_column(&text, "psi");
    let phi_quad = csv_column(&text, "phi_quad");
    assert_eq!(k.len(), 3);
    for i in 0..3 {
        assert!((k[i] - (3.0 * phi[i] + psi[i])).abs() < 1e-10);
        assert!((phi[i] - phi_quad[i]).abs() < 1e-8);
        assert!(k[i] > 0.0);
    }
}

#[test]
fn derivative_breakdown_sums_to_total() {
    let output = run(&[
        "derivative",
        "--q",
        "0.5,0.3,0.2",
        "--capacity",
        "1",
        "--theta",
        "0.5",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let terms = csv_column(&text, "pair_term");
    let total: f64 = csv_meta(&text, "derivative").unwrap().parse().unwrap();
    assert!((terms.iter().sum::<f64>() - total).abs() < 1e-12);
    assert!(total > 0.0);
}

#[test]
fn simulate_is_deterministic_and_close_to_exact() {
    let args = [
        "simulate",
        "--p",
        "0.5,0.3,0.2",
        "--capacity",
        "2",
        "--samples",
        "20000",
        "--steps",
        "20000",
        "--burn-in",
        "500",
        "--seed",
        "7",
    ];
    let first = run(&args);
    assert!(first.status.success());
    let second = run(&args);
    assert_eq!(stdout(&first), stdout(&second));

    let text = stdout(&first);
    let estimates = csv_column(&text, "hit_rate_estimate");
    let errors = csv_column(&text, "std_error");
    let exact: f64 = csv_meta(&text, "exact_hit_rate").unwrap().parse().unwrap();
    assert!((exact - 1007.0 / 1400.0).abs() < 1e-12);
    for (estimate, se) in estimates.iter().zip(&errors) {
        assert!((estimate - exact).abs() < 6.0 * se, "{estimate} vs {exact}");
    }
}

#[test]
fn json_format_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_lru-irm"))
        .args([
            "hitrate",
            "--p",
            "0.7,0.3",
            "--capacity",
            "1",
            "--format",
            "json",
            "--output",
            "hit.json",
        ])
        .env("LRU_IRM_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let written = std::fs::read_to_string(dir.path().join("hit.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&written).unwrap();
    assert_eq!(parsed["rows"][0]["method"], "residual");
    let value = parsed["rows"][0]["hit_rate"].as_f64().unwrap();
    assert_eq!(value.to_bits(), 0.58f64.to_bits());
}

#[test]
fn popularity_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("probs.txt");
    std::fs::write(&plain, "# comment\n0.7\n0.3 # trailing\n\n").unwrap();
    let output = run(&["hitrate", "--p-file", plain.to_str().unwrap(), "--capacity", "1"]);
    assert!(output.status.success());
    assert!(csv_column(&stdout(&output), "hit_rate")[0] - 0.58 < 1e-12);

    let json = dir.path().join("probs.json");
    std::fs::write(&json, "{\"probs\": [0.7, 0.3]}").unwrap();
    let output = run(&["hitrate", "--p-file", json.to_str().unwrap(), "--capacity", "1"]);
    assert!(output.status.success());
}

#[test]
fn verify_quick_passes_and_is_deterministic() {
    let args = ["verify", "--max-n", "4", "--seed", "11"];
    let first = run(&args);
    assert!(first.status.success(), "{}", stdout(&first));
    let text = stdout(&first);
    assert_eq!(csv_meta(&text, "all_passed").unwrap(), "true");
    assert!(text.lines().filter(|l| l.contains(",true")).count() >= 15);

    let second = run(&args);
    assert_eq!(text, stdout(&second));
}

#[test]
fn validation_failures_exit_two() {
    fn assert_exit_two(args: &[&str]) {
        let output = run(args);
        assert_eq!(output.status.code(), Some(2), "args: {args:?}");
        assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
    }

    // Boundary popularity entry.
    assert_exit_two(&["hitrate", "--p", "0.5,0.5,0.0", "--capacity", "1"]);
    // Capacity out of range.
    assert_exit_two(&["hitrate", "--p", "0.5,0.5", "--capacity", "3"]);
    // Two sources at once.
    assert_exit_two(&[
        "hitrate", "--p", "0.5,0.5", "--zipf", "4,1.0", "--capacity", "1",
    ]);
    // No source.
    assert_exit_two(&["searchcost"]);
    // Decreasing grid.
    assert_exit_two(&[
        "sweep", "--q", "0.7,0.3", "--capacity", "1", "--grid", "0.5,0.2",
    ]);
    // Oracle above its cap.
    assert_exit_two(&[
        "hitrate",
        "--p",
        "uniform",
        "--n",
        "10",
        "--capacity",
        "2",
        "--brute-force",
    ]);
    // Missing --n for uniform.
    assert_exit_two(&["hitrate", "--p", "uniform", "--capacity", "1"]);
    // Unreadable file.
    assert_exit_two(&[
        "hitrate",
        "--p-file",
        Path::new("/nonexistent/probs.txt").to_str().unwrap(),
        "--capacity",
        "1",
    ]);
}

#[test]
fn zipf_source_matches_library() {
    let output = run(&["hitrate", "--zipf", "4,1.0", "--capacity", "2"]);
    assert!(output.status.success());
    let value = csv_column(&stdout(&output), "hit_rate")[0];
    let p = lru_irm::PopularityVector::zipf(4, 1.0).unwrap();
    let params = lru_irm::ModelParams::new(4, 2).unwrap();
    let exact = lru_irm::hit_rate_residual(&p, &params).unwrap().value;
    assert_eq!(value.to_bits(), exact.to_bits());
}
