//! Black-box tests of the command-line surface: exit codes, CSV shape, and
//! the simulate -> predict round trip.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindpred"))
        .args(args)
        .output()
        .expect("failed to launch CLI")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_emits_metadata_and_n_values() {
    let out = run(&["simulate", "--model", "ma1 theta=0.5", "--n", "50", "--seed", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let meta: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(meta.iter().any(|l| l.starts_with("# tool: blindpred ")));
    assert!(meta.contains(&"# report: simulate"));
    assert!(meta.contains(&"# model: ma1 theta=0.5 sigma2=1"));
    assert!(meta.contains(&"# seed: 3"));
    assert_eq!(data.len(), 50);
    for line in data {
        line.parse::<f64>().expect("data line must be a float");
    }
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    let args = ["simulate", "--model", "white", "--n", "20", "--seed", "9"];
    let piped = run(&args);
    let mut with_out: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    with_out.extend(["--out".to_string(), file.display().to_string()]);
    let refs: Vec<&str> = with_out.iter().map(String::as_str).collect();
    let written = run(&refs);
    assert!(piped.status.success() && written.status.success());
    assert_eq!(std::fs::read_to_string(&file).unwrap(), stdout(&piped));
}

#[test]
fn simulate_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    let sim = run(&[
        "simulate", "--model", "ar1 phi=0.6", "--n", "20000", "--seed", "21",
        "--out", file.to_str().unwrap(),
    ]);
    assert!(sim.status.success());

    let fit = run(&[
        "predict", "--path", file.to_str().unwrap(), "--k", "3",
        "--model", "ar1 phi=0.6 m=0.25",
    ]);
    assert!(fit.status.success());
    let text = stdout(&fit);
    assert!(text.contains("# report: predict"));
    assert!(text.contains("# path_n: 20000"));
    assert!(text.contains("# window_k: 3"));
    assert!(text.contains("# floor_m: 2.5000000000000000e-1 (model)"));
    assert!(text.contains("# alpha_hat: "));
    // One prediction per future index in the window.
    let predictions = text
        .lines()
        .find_map(|l| l.strip_prefix("# predictions: "))
        .expect("predictions line");
    assert_eq!(predictions.split(',').count(), 3);
    // Coefficient matrix: 3 data rows of 3 columns.
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row.split(',').count(), 3);
        for v in row.split(',') {
            v.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn predict_without_model_uses_data_heuristic_floor() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    run(&[
        "simulate", "--model", "white", "--n", "5000", "--seed", "2",
        "--out", file.to_str().unwrap(),
    ]);
    let fit = run(&["predict", "--path", file.to_str().unwrap(), "--k", "2"]);
    assert!(fit.status.success());
    assert!(stdout(&fit).contains("(data-heuristic)"));

    let forced = run(&[
        "predict", "--path", file.to_str().unwrap(), "--k", "2", "--floor", "0.5",
    ]);
    assert!(forced.status.success());
    assert!(stdout(&forced).contains("# floor_m: 5.0000000000000000e-1 (flag)"));
}

#[test]
fn k_rule_flag_applies_the_window_formula() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    run(&[
        "simulate", "--model", "white", "--n", "2000", "--seed", "4",
        "--out", file.to_str().unwrap(),
    ]);
    // (2000 / ln 2000)^(1/10) rounds down to 1.
    let fit = run(&["predict", "--path", file.to_str().unwrap(), "--k-rule", "s=1"]);
    assert!(fit.status.success());
    assert!(stdout(&fit).contains("# window_k: 1"));
}

#[test]
fn usage_errors_exit_one() {
    let cases: [&[&str]; 5] = [
        &["risk", "--model", "nosuch foo=1", "--n", "100"],
        &["risk", "--model", "ar1 phi=0.6", "--n", "100", "--k", "3", "--k-rule", "s=2"],
        &["risk", "--model", "ar1 phi=0.6"],
        &["risk", "--model", "ar1 phi=0.6", "--n", "100", "--k-rule", "quadratic"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "expected exit 1 for {args:?}");
    }
}

#[test]
fn help_and_version_exit_zero() {
    for args in [["--help"], ["--version"]] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0));
    }
    let sub = run(&["risk", "--help"]);
    assert_eq!(sub.status.code(), Some(0));
}

#[test]
fn non_geometric_rate_grid_is_a_usage_error() {
    let out = run(&[
        "rate-sweep", "--model", "ma1 theta=0.5 m=0.25", "--grid", "1000,2000,3000,4000",
        "--reps", "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn risk_csv_has_full_schema() {
    let out = run(&[
        "risk", "--model", "ar1 phi=0.6 m=0.25", "--n", "2000", "--k", "2",
        "--reps", "50", "--seed", "8",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    for key in [
        "# tool:", "# report: risk", "# model:", "# rule:", "# replications: 50",
        "# master_seed: 8", "# oracle_past:", "# floor_m:", "# band:", "# constants:",
    ] {
        assert!(text.contains(key), "missing {key} in metadata");
    }
    let header = text.lines().find(|l| l.starts_with("n,")).expect("header row");
    assert_eq!(header.split(',').count(), 17);
    let row = text.lines().last().unwrap();
    assert!(row.starts_with("2000,2,"));
    assert_eq!(row.split(',').count(), 17);
}
