// End-to-end tests of the mabml binary: artifact layout, CSV shapes, exit
// codes and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mabml")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("out");
    write_config(
        dir,
        &format!(
            r#"{{
                "case_id": 6,
                "seed": 3,
                "h_list": [1],
                "runs": 20,
                "policies": ["mai", "greedy"],
                "draws": 2,
                "solver": {{"max_iters": 40}},
                "out_dir": "{}"
            }}"#,
            out.display()
        ),
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("lower_bound"));

    let dual_path = dir.path().join("out/dual.json");
    let idx_path = dir.path().join("out/indices.json");
    let dual_bytes = std::fs::read(&dual_path).unwrap();
    let idx_bytes = std::fs::read(&idx_path).unwrap();

    let dual: serde_json::Value = serde_json::from_slice(&dual_bytes).unwrap();
    let gamma = dual["gamma"].as_array().unwrap();
    assert_eq!(gamma.len(), 6);
    assert_eq!(gamma[0].as_array().unwrap().len(), 2);
    assert_eq!(gamma[0][0].as_array().unwrap().len(), 10);
    assert!(dual["lower_bound"].as_f64().unwrap() > 0.0);

    let out2 = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert!(out2.status.success());
    assert_eq!(std::fs::read(&dual_path).unwrap(), dual_bytes);
    assert_eq!(std::fs::read(&idx_path).unwrap(), idx_bytes);
}

#[test]
fn simulate_without_artifacts_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--h", "1", "--policy", "mai",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run solve first"), "{}", stderr(&out));
}

#[test]
fn simulate_emits_consistent_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(run(&["solve", "--config", cfg.to_str().unwrap()]).status.success());
    let out = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--h", "1", "--policy", "mai",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let runs_text = std::fs::read_to_string(dir.path().join("out/runs_h1_mai.csv")).unwrap();
    let runs: Vec<&str> = runs_text.lines().collect();
    assert_eq!(runs.len(), 21); // header + 20 runs
    assert_eq!(runs[0], "h,policy,run_index,normalized_cost,feasible,adapted_fraction");
    assert!(!runs_text.contains('\r'));
    let costs: Vec<f64> = runs[1..]
        .iter()
        .map(|line| line.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;

    let summary_text =
        std::fs::read_to_string(dir.path().join("out/summary_h1_mai.csv")).unwrap();
    let summary: Vec<&str> = summary_text.lines().collect();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0], "h,policy,runs,mean,ci_halfwidth,lower_bound,deviation");
    let fields: Vec<&str> = summary[1].split(',').collect();
    assert_eq!(fields[0], "1");
    assert_eq!(fields[1], "mai");
    assert_eq!(fields[2], "20");
    let s_mean: f64 = fields[3].parse().unwrap();
    let s_lb: f64 = fields[5].parse().unwrap();
    let s_dev: f64 = fields[6].parse().unwrap();
    assert!((s_mean - mean).abs() < 1e-9);
    assert!((s_dev - (s_mean - s_lb) / s_lb).abs() < 1e-12);

    // reruns are byte-identical
    let bytes = std::fs::read(dir.path().join("out/runs_h1_mai.csv")).unwrap();
    assert!(run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--h", "1", "--policy", "mai",
    ])
    .status
    .success());
    assert_eq!(std::fs::read(dir.path().join("out/runs_h1_mai.csv")).unwrap(), bytes);
}

#[test]
fn artifacts_from_a_different_seed_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(run(&["solve", "--config", cfg.to_str().unwrap()]).status.success());
    let out = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--h", "1", "--policy", "mai",
        "--seed", "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fingerprint"), "{}", stderr(&out));
}

#[test]
fn sweep_emits_one_row_per_draw_h_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "draw,h,policy,runs,mean,ci_halfwidth,lower_bound,deviation");
    assert_eq!(lines.len(), 1 + 2 * 1 * 2); // draws * h values * policies
    for line in &lines[1..] {
        let dev: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(dev.is_finite());
    }
}

#[test]
fn oracle_reports_a_clean_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/oracle_report.json")).unwrap())
            .unwrap();
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 5);
    for e in entries {
        assert_eq!(e["sandwich_ok"], true, "{}", e);
        assert!(e["lower_bound"].as_f64().unwrap() <= e["opt"].as_f64().unwrap() + 1e-6);
    }
}

#[test]
fn invalid_configs_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"case_id": 7, "seed": 1, "h_list": [1], "runs": 2,
            "policies": ["mai"], "out_dir": "/tmp/unused"}"#,
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("case_id"));
}
