use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn qnet")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qnet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const QUICK: &[&str] = &[
    "--lc", "2", "--lr-layers", "2", "--d", "4", "--eta", "0.05", "--iters", "5", "--seed", "7", "--log-every", "0",
];

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen-data", "--m", "25", "--side", "4", "--seed", "42", "--kind", "binary", "--out", "data/", "--format", "pbm"]);
    assert!(dir.join("data/manifest.json").exists());
    assert!(dir.join("data/images.pbm").exists());

    let mut train = vec!["train", "--data", "data/", "--out", "run1/"];
    train.extend_from_slice(QUICK);
    let stdout = ok(dir, &train);
    assert!(stdout.contains("parameters 30 + 30"), "{stdout}");
    for f in ["loss.csv", "model.json", "reconstructions.csv", "summary.json", "config.json"] {
        assert!(dir.join("run1").join(f).exists(), "missing {f}");
    }
    let loss = fs::read_to_string(dir.join("run1/loss.csv")).unwrap();
    assert!(loss.starts_with("iteration,L_C,L_R,accuracy_percent,elapsed_s"));
    assert_eq!(loss.lines().count(), 7);

    let eval = ok(dir, &["eval", "--checkpoint", "run1/model.json", "--data", "data/", "--tol", "0.01"]);
    assert!(eval.contains("accuracy"));

    ok(dir, &["baseline", "--data", "data/", "--sparsity", "4", "--iters", "5", "--out", "run1/"]);
    let table = ok(dir, &["compare", "--runs", "run1/", "--out", "run1/table1.csv"]);
    assert!(table.contains("QN-based") && table.contains("CSC-based") && table.contains("16*16"));
    let csv = fs::read_to_string(dir.join("run1/table1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    ok(dir, &["export-unitary", "--checkpoint", "run1/model.json", "--which", "reconstruction", "--out", "u.csv"]);
    let rows = fs::read_to_string(dir.join("u.csv")).unwrap();
    assert_eq!(rows.lines().count(), 16);
    assert!(rows.lines().all(|l| l.split(',').count() == 16));

    ok(dir, &["roundtrip", "--data", "data/"]);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("cfg.json"),
        r#"{"m": 6, "side": 2, "lc": 1, "lr_layers": 1, "d": 2, "iters": 3, "eta": 0.1, "out": "fromfile"}"#,
    )
    .unwrap();
    ok(dir, &["train", "--config", "cfg.json", "--iters", "2", "--log-every", "0"]);
    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("fromfile/config.json")).unwrap()).unwrap();
    assert_eq!(echo["iters"], 2);
    assert_eq!(echo["eta"], 0.1);
    assert_eq!(echo["m"], 6);
    assert!(dir.join("fromfile/data/manifest.json").exists());
}

#[test]
fn same_seed_gives_identical_loss_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen-data", "--m", "8", "--side", "2", "--seed", "3", "--out", "data"]);
    for run in ["a", "b"] {
        let mut args = vec!["train", "--data", "data", "--out", run, "--record-time", "false", "--d", "2"];
        args.extend_from_slice(&QUICK[..2]);
        args.extend_from_slice(&["--lr-layers", "2", "--iters", "4", "--log-every", "0"]);
        ok(dir, &args);
    }
    assert_eq!(
        fs::read(dir.join("a/loss.csv")).unwrap(),
        fs::read(dir.join("b/loss.csv")).unwrap()
    );
}

#[test]
fn missing_dataset_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qnet(tmp.path(), &["train", "--data", "no_such_dir", "--out", "r", "--iters", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_dir"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"etaa": 0.1}"#).unwrap();
    let out = qnet(tmp.path(), &["train", "--config", "c.json", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("etaa"));
}

#[test]
fn bad_enum_value_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qnet(tmp.path(), &["train", "--grad-mode", "magic", "--out", "r", "--m", "2", "--side", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn impossible_dataset_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qnet(tmp.path(), &["gen-data", "--m", "16", "--side", "2", "--out", "d"]);
    assert!(!out.status.success());
    assert!(!tmp.path().join("d/manifest.json").exists());
}
