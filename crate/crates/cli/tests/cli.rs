use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialect-lab"))
        .args(args)
        .env_remove("DIALECT_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2_and_stage_failures_exit_1() {
    assert_eq!(cli(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = cli(&["extract", "--features", "mfcc", "--in", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: extract failed"), "{err}");
}

#[test]
fn config_file_fills_in_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("synth.conf");
    fs::write(&config, "# tiny corpus\nn = 6\nseed = 3\n").unwrap();
    let out = root.join("corpus");
    ok(&["synth-corpus", "--config", s(&config), "--seed", "4", "--out", s(&out)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 6);
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(manifest["seed"], 4);
    let listed = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert_eq!(listed.lines().count(), 1 + 18);

    fs::write(&config, "n 6\n").unwrap();
    assert_eq!(cli(&["synth-corpus", "--config", s(&config), "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn replay_reproduces_a_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (corpus, feats, run) = (root.join("c"), root.join("f"), root.join("r"));
    ok(&["synth-corpus", "--n", "5", "--seed", "2", "--out", s(&corpus)]);
    ok(&["extract", "--features", "mfcc", "--in", s(&corpus), "--out", s(&feats)]);
    let printed = ok(&[
        "train", "--features", "mfcc", "--model", "rnn", "--cell", "simple", "--epochs", "3", "--in", s(&feats),
        "--out", s(&run), "--seed", "5",
    ]);
    assert!(printed.starts_with("mfcc+rnn seed 5: best epoch"), "{printed}");

    let checkpoint = run.join("checkpoint.bin");
    let first = fs::read(&checkpoint).unwrap();
    fs::remove_file(&checkpoint).unwrap();
    ok(&["replay", "--manifest", s(&run.join("run_manifest.json"))]);
    assert_eq!(fs::read(&checkpoint).unwrap(), first);

    let eval = root.join("eval.json");
    ok(&["evaluate", "--checkpoint", s(&checkpoint), "--in", s(&feats), "--out", s(&eval)]);
    let trained: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let evaluated: serde_json::Value = serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(trained["confusion"], evaluated["confusion"]);
    assert!(root.join("eval.json.run.json").exists());

    let table = ok(&["report", "--inputs", s(&eval)]);
    assert!(table.lines().nth(1).unwrap().starts_with("MFCC + RNN"), "{table}");
}
