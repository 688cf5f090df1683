use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kp(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kp"));
    c.args(args);
    // keep the caller's environment from leaking into flag defaults
    for (k, _) in std::env::vars() {
        if k.starts_with("KP_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("spawn kp")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    v
}

fn synth(dir: &Path) {
    let out = run(kp(&["synth-gen", "--entities", "60", "--clusters", "6", "--out"]).arg(dir));
    json(&out);
    for f in ["train.tsv", "valid.tsv", "test.tsv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&mut kp(&[])).status.code(), Some(1));
    assert_eq!(run(&mut kp(&["no-such-command"])).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    // --seed is required for train
    let out = run(kp(&["train", "--out"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let out = run(kp(&["train", "--seed", "1", "--model-kind", "nope", "--out"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(kp(&["load-check", "--data-dir"]).arg(dir.path().join("absent")));
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn env_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(kp(&["train", "--epochs", "2", "--eval-every", "1", "--dim", "8", "--out"])
        .arg(dir.path())
        .env("KP_SEED", "4"));
    json(&out);
    assert!(fs::read_dir(dir.path()).unwrap().count() > 0);
}

#[test]
fn synth_train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);

    let v = json(&run(kp(&["load-check", "--data-dir"]).arg(&data)));
    assert!(v["result"].is_object());

    let ckpt = tmp.path().join("ckpt");
    let common = ["--epochs", "6", "--eval-every", "2", "--dim", "8", "--seed", "3"];
    let mut c = kp(&["train", "--model-kind", "distmult"]);
    c.args(common).arg("--data-dir").arg(&data).arg("--out").arg(&ckpt);
    json(&run(&mut c));

    let runs = tmp.path().join("runs");
    let mut c = kp(&["eval", "--run-id", "r1", "--models", "distmult"]);
    c.args(common)
        .arg("--data-dir")
        .arg(&data)
        .arg("--checkpoint-dir")
        .arg(&ckpt)
        .arg("--out")
        .arg(&runs);
    json(&run(&mut c));
    let reports = runs.join("r1").join("reports.jsonl");
    let lines: Vec<Value> = fs::read_to_string(&reports)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|r| r["schema"] == 1));

    let v = json(&run(kp(&["timing", "--reports"]).arg(&reports)));
    assert!(v["result"].is_object());
    let v = json(&run(kp(&["correlate", "--metric-x", "kp_test", "--metric-y", "mrr", "--reports"]).arg(&reports)));
    assert!(v["result"]["pearson"].is_number());
    let out = run(kp(&["correlate", "--metric-x", "nope", "--reports"]).arg(&reports));
    assert_eq!(out.status.code(), Some(1));
    let v = json(&run(kp(&["early-stop", "--reports"]).arg(&reports)));
    assert!(v["result"].is_object());
}

#[test]
fn theory_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(kp(&["theory", "--trials", "10", "--samples", "500", "--out"]).arg(dir.path())));
    assert_eq!(v["command"], "theory");
    assert!(fs::read_dir(dir.path()).unwrap().count() > 0);
}
