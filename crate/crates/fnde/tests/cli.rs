use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fnde::checkpoint::load_checkpoint;
use fnde::dataset::{read_dataset, read_matrix_csv};
use fnde::report::read_history_csv;
use fnde_core::ModelKind;

fn fnde(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnde"))
        .env("FNDE_OUT_DIR", out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    serde_json::from_slice(&output.stdout).expect("one JSON line on stdout")
}

#[test]
fn generate_writes_dataset_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let json = stdout_json(&fnde(dir.path(), &["generate", "--theory", "scalar_yukawa", "--order", "2", "--np", "5"]));
    assert_eq!(json["samples"], 16);
    let path = dir.path().join("scalar_yukawa_o2_np5.csv");
    assert!(path.with_extension("toml").exists());
    let data = read_dataset(&path).unwrap();
    assert_eq!(data.len(), 16);
    assert_eq!(data.provenance.order, 2);
}

#[test]
fn train_evaluate_extract_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    stdout_json(&fnde(out, &["generate", "--np", "4", "--validation"]));
    let trained = stdout_json(&fnde(out, &["train", "--model", "NODE", "--np", "4", "--epochs", "3", "--seed", "2"]));
    let ckpt = out.join("NODE_phi4_o1_np4_s2.ckpt");
    assert_eq!(trained["checkpoint"], ckpt.to_str().unwrap());
    assert_eq!(load_checkpoint(&ckpt).unwrap().kind, ModelKind::Node);
    let history = read_history_csv(&out.join("NODE_phi4_o1_np4_s2_history.csv"), 4).unwrap();
    assert_eq!(history[0].history.len(), 3);

    let data = out.join("phi4_o1_np4_val.csv");
    let eval = stdout_json(&fnde(out, &["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--data", data.to_str().unwrap()]));
    assert!(eval["mse"].as_f64().unwrap().is_finite());

    let extracted = stdout_json(&fnde(out, &["extract", "--checkpoint", ckpt.to_str().unwrap()]));
    assert!(extracted["self_consistency"].as_f64().unwrap() < 1e-8);
    assert_eq!(read_matrix_csv(&out.join("NODE_phi4_o1_np4_s2_hamiltonian.csv")).unwrap().shape(), (4, 4));

    stdout_json(&fnde(out, &["train", "--model", "FNDE_MOD", "--np", "5", "--epochs", "2"]));
    let ckpt = out.join("FNDE_MOD_phi4_o1_np5_s0.ckpt");
    let density = stdout_json(&fnde(out, &["extract", "--checkpoint", ckpt.to_str().unwrap()]));
    assert_eq!((density["rows"].as_u64(), density["cols"].as_u64()), (Some(5), Some(3)));
}

#[test]
fn smoke_experiment_emits_reports_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let json = stdout_json(&fnde(out, &["experiment", "extrapolation", "--smoke", "--model", "FNO,FNDE", "--ratio-max", "1.3"]));
    assert_eq!(json["runs"], 2);
    assert_eq!(json["failures"], 0);
    let rows = fs::read_to_string(out.join("extrapolation_extrapolation.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 4);
    let svg = fs::read_to_string(out.join("extrapolation_losses.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    let history = read_history_csv(&out.join("extrapolation_history.csv"), 6).unwrap();
    assert!(history.iter().all(|r| r.history.len() == 10));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config = out.join("run.toml");
    fs::write(&config, "models = [\"FNO\"]\nnp = [4]\n[train]\nepochs = 5\nseeds = 1\n").unwrap();
    let cfg = config.to_str().unwrap();
    stdout_json(&fnde(out, &["--config", cfg, "experiment", "validation", "--epochs", "2"]));
    let runs = read_history_csv(&out.join("validation_history.csv"), 4).unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].model, ModelKind::Fno);
    assert_eq!(runs[0].history.len(), 2);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let output = fnde(dir.path(), &["--help"]);
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("experiment"));
}

#[test]
fn out_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    stdout_json(&fnde(env_dir.path(), &["generate", "--np", "3", "--out", flag_dir.path().to_str().unwrap()]));
    assert!(flag_dir.path().join("phi4_o1_np3.csv").exists());
    assert!(!env_dir.path().join("phi4_o1_np3.csv").exists());
}

#[test]
fn failures_print_a_json_error_line_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for (args, kind) in [
        (vec!["experiment", "figure9"], "config"),
        (vec!["generate", "--order", "4"], "config"),
        (vec!["generate", "--theory", "qcd"], "invalid"),
        (vec!["evaluate", "--checkpoint", "/nonexistent.ckpt", "--data", "x.csv"], "io"),
        (vec!["train", "--epochs", "many"], "usage"),
        (vec!["evaluate"], "usage"),
    ] {
        let output = fnde(dir.path(), &args);
        assert!(!output.status.success(), "{args:?}");
        let line: serde_json::Value = serde_json::from_slice(&output.stderr).expect("JSON error line");
        assert_eq!(line["error"], kind, "{args:?}: {line}");
        assert!(line["message"].as_str().is_some());
    }
}
