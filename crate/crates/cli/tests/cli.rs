//! End-to-end tests of the `linearizer` binary: exit codes, artifact
//! placement, determinism, and the documented out-dir precedence.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_linearizer"));
    // Isolate tests from any ambient override.
    cmd.env_remove("LINEARIZER_OUT_DIR");
    cmd
}

/// Small-but-real hyperparameters so training subcommands finish in
/// milliseconds.
fn tiny_args(out_dir: &Path) -> Vec<String> {
    [
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--n-points",
        "64",
        "--blocks",
        "2",
        "--hidden",
        "8",
        "--rank",
        "2",
        "--steps",
        "5",
        "--batch",
        "16",
        "--sample-steps",
        "8",
        "--n-samples",
        "12",
        "--ign-dim",
        "4",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {:?}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn args_with(out_dir: &Path, head: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    v.extend(tiny_args(out_dir));
    v
}

/// Replace `--flag value` in an arg list (the flag must already be present).
fn set_flag(args: &mut Vec<String>, flag: &str, value: &str) {
    let i = args.iter().position(|a| a == flag).expect("flag present");
    args[i + 1] = value.to_string();
}

#[test]
fn train_flow_zero_steps_is_a_valid_noop() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_with(dir.path(), &["train-flow"]);
    // Override the tiny default of 5 steps.
    set_flag(&mut args, "--steps", "0");
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["task"], "train-flow");
    assert_eq!(summary["steps"], 0);
    assert!(dir.path().join("flow.ckpt").exists());
    let metrics = std::fs::read_to_string(dir.path().join("metrics_flow.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 1, "loss should be logged exactly once");
}

#[test]
fn usage_errors_exit_one() {
    // Unknown flag.
    let out = bin().args(["train-flow", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Invalid field value, named in the diagnostic.
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_with(dir.path(), &["train-flow"]);
    args.extend(["--batch".to_string(), "0".to_string()]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("batch"), "diagnostic names the field: {stderr}");
}

#[test]
fn unknown_config_key_exits_one_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"seeed": 1}"#).unwrap();
    let out = bin()
        .args(["verify", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seeed"), "diagnostic names the unknown key: {stderr}");
}

#[test]
fn config_task_field_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"task": "verify"}"#).unwrap();
    let mut args = args_with(dir.path(), &["train-flow"]);
    args.extend(["--config".to_string(), cfg_path.to_str().unwrap().to_string()]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("verify") && stderr.contains("train-flow"), "{stderr}");
}

#[test]
fn missing_checkpoint_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&args_with(dir.path(), &["sample"]));
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupt_checkpoint_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&args_with(dir.path(), &["train-flow"]));
    assert!(out.status.success());
    let ckpt = dir.path().join("flow.ckpt");
    let bytes = std::fs::read(&ckpt).unwrap();
    std::fs::write(&ckpt, &bytes[..bytes.len() - 16]).unwrap();
    let out = run(&args_with(dir.path(), &["sample"]));
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("checksum") || stderr.contains("truncated"), "{stderr}");
}

#[test]
fn sampling_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&args_with(dir.path(), &["train-flow"])).status.success());

    let out = run(&args_with(dir.path(), &["sample"]));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let iterative = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();

    let out = run(&args_with(dir.path(), &["sample", "--one-step"]));
    assert!(out.status.success());
    let one_step = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();

    // Same priors, nearly identical samples: compare cell by cell.
    let parse = |text: &str| -> Vec<Vec<f64>> {
        text.lines()
            .skip(1)
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (parse(&iterative), parse(&one_step));
    assert_eq!(a.len(), 12);
    let mut max_diff = 0.0f64;
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            max_diff = max_diff.max((x - y).abs());
        }
    }
    assert!(max_diff < 1e-6, "one-step vs iterative: {max_diff}");

    assert!(run(&args_with(dir.path(), &["collapse"])).status.success());
    assert!(dir.path().join("collapsed.json").exists());
}

#[test]
fn identical_runs_write_byte_identical_checkpoints() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert!(run(&args_with(dir_a.path(), &["train-flow"])).status.success());
    assert!(run(&args_with(dir_b.path(), &["train-flow"])).status.success());
    let a = std::fs::read(dir_a.path().join("flow.ckpt")).unwrap();
    let b = std::fs::read(dir_b.path().join("flow.ckpt")).unwrap();
    assert_eq!(a, b, "same config and seed must reproduce the checkpoint bit for bit");
}

#[test]
fn out_dir_precedence_is_flag_env_config() {
    let base = tempfile::tempdir().unwrap();
    let env_dir = base.path().join("from_env");
    let flag_dir = base.path().join("from_flag");

    // Env var applies when no flag is given.
    let mut args: Vec<String> = vec!["train-flow".into()];
    let tail = tiny_args(Path::new("unused"));
    args.extend(tail[2..].iter().cloned()); // drop the --out-dir pair
    set_flag(&mut args, "--steps", "0");
    let out = bin()
        .args(&args)
        .env("LINEARIZER_OUT_DIR", env_dir.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("flow.ckpt").exists());

    // An explicit flag beats the env var.
    let mut args_flag = args.clone();
    args_flag.extend(["--out-dir".to_string(), flag_dir.to_str().unwrap().to_string()]);
    let out = bin()
        .args(&args_flag)
        .env("LINEARIZER_OUT_DIR", env_dir.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_dir.join("flow.ckpt").exists());
}

#[test]
fn style_basis_mismatch_exits_two() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let mut fit_a = args_with(dir_a.path(), &["style-interp", "--fit"]);
    set_flag(&mut fit_a, "--steps", "2");
    assert!(run(&fit_a).status.success());
    let mut fit_b = args_with(dir_b.path(), &["style-interp", "--fit"]);
    set_flag(&mut fit_b, "--steps", "2");
    set_flag(&mut fit_b, "--seed", "4");
    assert!(run(&fit_b).status.success());

    // Mix checkpoints from two different bases.
    std::fs::copy(dir_b.path().join("style_b.ckpt"), dir_a.path().join("style_b.ckpt")).unwrap();
    let out = run(&args_with(dir_a.path(), &["style-interp"]));
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("basis"), "{stderr}");
}

#[test]
fn verify_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&args_with(dir.path(), &["verify"]));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["pass"], true);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap())
            .unwrap();
    assert!(report["checks"].as_array().unwrap().len() > 30);
}
