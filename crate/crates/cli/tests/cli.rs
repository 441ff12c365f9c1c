//! End-to-end tests of the `mrrn` binary: exit codes, config precedence,
//! and the synth -> train -> eval -> fuse pipeline at toy scale.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mrrn() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mrrn"));
    cmd.env_remove("MRRN_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn mrrn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [vec!["--help"], vec!["train", "--help"], vec!["--version"]] {
        let out = run(mrrn().args(&args));
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let out = run(mrrn().args(["synth", "--frobnicate", "1"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_required_flag_is_a_validation_error() {
    let out = run(mrrn().args(["train"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("--manifest"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn unreadable_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(mrrn()
        .current_dir(dir.path())
        .args(["eval", "--checkpoint", "nope.ckpt", "--manifest", "nope.jsonl"]));
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_config_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "[synth]\nthis line has no equals sign\n").unwrap();
    let out = run(mrrn()
        .current_dir(dir.path())
        .args(["--config", "bad.conf", "synth"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "stderr: {}", stderr(&out));

    std::fs::write(&cfg, "classes = 2\n[synth]\n").unwrap();
    let out = run(mrrn()
        .current_dir(dir.path())
        .args(["--config", "bad.conf", "synth"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("before any [section]"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn invalid_fusion_weights_are_rejected() {
    let out = run(mrrn().args([
        "fuse", "--high", "a.json", "--mid", "b.json", "--low", "c.json", "--weights", "1,1",
    ]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mrrn.conf");
    std::fs::write(&cfg, "[synth]\nclasses = 2\nclips = 13\nseed = 4\n").unwrap();

    let out = run(mrrn()
        .current_dir(dir.path())
        .args(["--config", "mrrn.conf", "synth", "--out", "d1"]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("(2 classes)"), "stdout: {}", stdout(&out));

    let out = run(mrrn().current_dir(dir.path()).args([
        "--config", "mrrn.conf", "synth", "--classes", "3", "--out", "d2",
    ]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("(3 classes)"), "stdout: {}", stdout(&out));
}

#[test]
fn mrrn_seed_env_matches_explicit_seed_flag() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let out = run(mrrn().current_dir(d1.path()).args([
        "synth", "--classes", "2", "--clips", "13", "--seed", "9", "--out", "data",
    ]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let out = run(mrrn()
        .current_dir(d2.path())
        .env("MRRN_SEED", "9")
        .args(["synth", "--classes", "2", "--clips", "13", "--out", "data"]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    for rel in ["data/manifest.jsonl", "data/features/video_00000.high.feat"] {
        let a = std::fs::read(d1.path().join(rel)).unwrap();
        let b = std::fs::read(d2.path().join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between --seed and MRRN_SEED");
    }
}

#[test]
fn complexity_reports_the_bundled_resnet34() {
    let arch = repo_root().join("configs/resnet34.arch");
    let out = run(mrrn().args(["complexity", "--arch", arch.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("resnet34,3663761408,21779648"),
        "stdout: {}",
        stdout(&out)
    );
}

#[test]
fn pipeline_synth_train_eval_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = run(mrrn().current_dir(root).args([
        "synth", "--classes", "3", "--clips", "13", "--seed", "5", "--out", "data",
    ]));
    assert_eq!(out.status.code(), Some(0), "synth: {}", stderr(&out));

    for level in ["high", "mid", "low"] {
        let run_dir = format!("run_{level}");
        let out = run(mrrn().current_dir(root).args([
            "train",
            "--manifest",
            "data/manifest.jsonl",
            "--level",
            level,
            "--hidden",
            "12",
            "--layers",
            "2",
            "--epochs",
            "1",
            "--seed",
            "5",
            "--out",
            &run_dir,
        ]));
        assert_eq!(out.status.code(), Some(0), "train {level}: {}", stderr(&out));
        assert!(root.join(&run_dir).join("model.ckpt").exists());
        let history = std::fs::read_to_string(root.join(&run_dir).join("history.csv")).unwrap();
        assert!(history.starts_with("epoch,"), "history: {history}");

        let out = run(mrrn().current_dir(root).args([
            "eval",
            "--checkpoint",
            &format!("{run_dir}/model.ckpt"),
            "--manifest",
            "data/manifest.jsonl",
            "--out",
            &format!("eval_{level}"),
        ]));
        assert_eq!(out.status.code(), Some(0), "eval {level}: {}", stderr(&out));
        assert!(root.join(format!("eval_{level}/eval.json")).exists());
    }

    let out = run(mrrn().current_dir(root).args([
        "fuse",
        "--high",
        "eval_high/eval.json",
        "--mid",
        "eval_mid/eval.json",
        "--low",
        "eval_low/eval.json",
        "--out",
        "fused",
    ]));
    assert_eq!(out.status.code(), Some(0), "fuse: {}", stderr(&out));
    assert!(stdout(&out).contains("fused"), "stdout: {}", stdout(&out));
    let fused: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("fused/eval.json")).unwrap())
            .unwrap();
    let videos = fused["videos"].as_array().unwrap();
    assert_eq!(videos.len(), 3);
    for v in videos {
        let probs: Vec<f64> = v["prediction"]["probs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p.as_f64().unwrap())
            .collect();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "probs sum {sum}");
        assert!(probs.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn bench_prints_csv() {
    let out = run(mrrn().args([
        "bench", "--cell", "sru", "--t", "4", "--batch", "2", "--hidden", "8", "--repeats", "3",
        "--warmup", "1",
    ]));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().starts_with("cell,"), "{text}");
    assert!(text.contains("sru,4,2,8"), "{text}");
}
