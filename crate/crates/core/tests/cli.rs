use foliate::train::{decode_checkpoint, encode_checkpoint, load_checkpoint};
use std::path::Path;
use std::process::{Command, Output};

fn foliate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foliate"))
        .args(args)
        .env_remove("FOLIATE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_fixture(dir: &Path, epochs: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--synthetic", "--epochs", epochs, "--seed", "3", "--out", p(dir)];
    args.extend_from_slice(extra);
    let o = foliate(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&foliate(&[])), 1);
    assert_eq!(code(&foliate(&["train", "--epochs", "x"])), 1);
    let dir = tempfile::tempdir().unwrap();
    // No data source, then two.
    assert_eq!(code(&foliate(&["train", "--out", p(dir.path())])), 1);
    assert_eq!(code(&foliate(&["train", "--synthetic", "--glyphs", "5", "--out", p(dir.path())])), 1);
    assert_eq!(code(&foliate(&["check", "--points", "0", "--out", p(dir.path())])), 1);
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = foliate(&["spectrum", "--checkpoint", "/nonexistent/ckpt.bin", "--synthetic", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = foliate(&["train", "--images", "/nonexistent/i", "--labels", "/nonexistent/l", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fresh_net_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = foliate(&["check", "--points", "10", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("check.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")), "{csv}");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn nan_checkpoint_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture(dir.path(), "1", &[]);
    let mut ckpt = load_checkpoint(dir.path().join("ckpt_epoch_001.bin")).unwrap();
    let mut flat = ckpt.params.flatten();
    flat[5] = f64::NAN;
    ckpt.params = ckpt.params.with_flat(&flat).unwrap();
    let bytes = encode_checkpoint(&ckpt);
    assert!(decode_checkpoint(&bytes).is_ok());
    let bad = dir.path().join("nan.bin");
    std::fs::write(&bad, bytes).unwrap();
    let out = dir.path().join("check");
    let o = foliate(&["check", "--checkpoint", p(&bad), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    let csv = std::fs::read_to_string(out.join("check.csv")).unwrap();
    assert!(csv.contains("finiteness,1,1,inf,fail"), "{csv}");
}

#[test]
fn defaults_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_fixture(dir.path(), "1", &[]);
    assert!(stdout(&o).contains("lr=0.01 batch=60"), "{}", stdout(&o));
}

#[test]
fn zero_learning_rate_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture(dir.path(), "2", &["--lr", "0"]);
    let init = load_checkpoint(dir.path().join("ckpt_epoch_000.bin")).unwrap();
    let last = load_checkpoint(dir.path().join("ckpt_epoch_002.bin")).unwrap();
    assert_eq!(init.params, last.params);
    assert_eq!(last.epoch, 2);
    assert!(last.step > 0);
}

#[test]
fn synthetic_fixture_is_learned() {
    let dir = tempfile::tempdir().unwrap();
    let o = foliate(&["train", "--synthetic", "--epochs", "20", "--seed", "1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let acc = m["summary"]["train_accuracy"].as_f64().unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn analysis_commands_and_bad_indices() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture(dir.path(), "2", &[]);
    let ck = dir.path().join("ckpt_epoch_002.bin");
    let ck = p(&ck);
    let sub = |name: &str| dir.path().join(name);

    let s = sub("spectrum");
    assert_eq!(code(&foliate(&["spectrum", "--checkpoint", ck, "--synthetic", "--points", "5", "--out", p(&s)])), 0);
    let inv = sub("inv");
    let o = foliate(&["involutivity", "--checkpoint", ck, "--synthetic", "--points", "3", "--pairs", "0:1,1:2", "--out", p(&inv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("max relative residual"));
    let path = sub("path");
    let o = foliate(&["path", "--checkpoint", ck, "--synthetic", "--src", "0", "--dst", "150", "--steps", "50", "--out", p(&path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["path.csv", "path.points", "path.pgm", "path_frames.csv", "manifest.json"] {
        assert!(path.join(f).exists(), "{f}");
    }
    let walk = sub("walk");
    assert_eq!(code(&foliate(&["noise", "--checkpoint", ck, "--synthetic", "--idx", "4", "--steps", "20", "--out", p(&walk)])), 0);
    assert!(walk.join("walk.pgm").exists());

    let bad = sub("bad");
    assert_eq!(code(&foliate(&["path", "--checkpoint", ck, "--synthetic", "--src", "0", "--dst", "300", "--out", p(&bad)])), 1);
    assert_eq!(code(&foliate(&["noise", "--checkpoint", ck, "--synthetic", "--idx", "9999", "--out", p(&bad)])), 1);
    assert_eq!(code(&foliate(&["involutivity", "--checkpoint", ck, "--synthetic", "--pairs", "0:3", "--out", p(&bad)])), 1);
    // Dimension mismatch between checkpoint and data.
    assert_eq!(code(&foliate(&["spectrum", "--checkpoint", ck, "--synthetic", "--dim", "5", "--out", p(&bad)])), 1);
}

#[test]
fn replay_reproduces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture(dir.path(), "2", &[]);
    let first: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let again = dir.path().join("again");
    let o = foliate(&["replay", "--manifest", p(&dir.path().join("manifest.json")), "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    let second: serde_json::Value =
        serde_json::from_slice(&std::fs::read(again.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(first["artifacts"], second["artifacts"]);
    assert_eq!(first["seeds"], second["seeds"]);
    for name in first["artifacts"].as_object().unwrap().keys() {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
}
