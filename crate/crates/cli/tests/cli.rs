use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use greenhouse_core::env::EnvConfig;

fn greenhouse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenhouse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = greenhouse(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// `(label, n, mean)` from a stats CSV.
fn stats_row(csv: &str) -> (String, usize, f64) {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("label,n,mean,stddev,min,max"));
    let f: Vec<&str> = lines.next().unwrap().split(',').collect();
    (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/greenhouse.conf")
}

#[test]
fn shipped_config_matches_defaults() {
    assert_eq!(EnvConfig::load(shipped_config()).unwrap(), EnvConfig::default());
}

#[test]
fn noop_baseline_mean() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(&["simulate", "--policy", "noop", "--episodes", "1000", "--out", &p(d.path(), "l.jsonl")]);
    let (label, n, mean) = stats_row(&out);
    assert_eq!((label.as_str(), n), ("noop", 1000));
    assert!((6.0..=14.0).contains(&mean), "noop mean {mean}");
    let logs = std::fs::read_to_string(d.path().join("l.jsonl")).unwrap();
    assert_eq!(logs.lines().count(), 1000);
}

#[test]
fn simulate_is_byte_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        ok(&[
            "simulate",
            "--policy",
            "random",
            "--episodes",
            "50",
            "--seed",
            "9",
            "--out",
            &p(d.path(), &format!("{name}.jsonl")),
            "--stats",
            &p(d.path(), &format!("{name}.csv")),
        ]);
    }
    for ext in ["jsonl", "csv"] {
        let a = std::fs::read(d.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(d.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs");
    }
}

#[test]
fn pid_trials_order_against_noop() {
    let d = tempfile::tempdir().unwrap();
    let out = |args: &[&str]| stats_row(&ok(args)).2;
    let log = p(d.path(), "l.jsonl");
    let noop = out(&["simulate", "--episodes", "1000", "--out", &log]);
    let a = out(&["pid", "--trial", "A", "--episodes", "1000", "--out", &log]);
    let b = out(&["pid", "--trial", "B", "--episodes", "1000", "--out", &log]);
    let c = out(&["pid", "--trial", "C", "--episodes", "1000", "--out", &log]);
    assert!(a < noop && b < noop, "A {a} B {b} noop {noop}");
    assert!(c >= noop && c > 10.0, "C {c} noop {noop}");
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let log = p(d.path(), "l.jsonl");
    for args in [
        vec!["simulate", "--episodes", "0", "--out", &log],
        vec!["pid", "--trial", "D", "--out", &log],
        vec!["simulate", "--policy", "fan", "--out", &log],
        vec!["train", "--agent", "sarsa", "--metrics", &log, "--checkpoint", &log],
        vec!["bogus"],
        vec![],
    ] {
        assert_eq!(greenhouse(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let missing = p(d.path(), "missing/dir/l.jsonl");
    assert_eq!(greenhouse(&["simulate", "--out", &missing]).status.code(), Some(1));
    let out = greenhouse(&["eval", "--agent", "ac", "--checkpoint", &p(d.path(), "nothing")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(greenhouse(&["report", "--metrics", &missing, "--out", &p(d.path(), "c.csv")]).status.code(), Some(1));
    let bad_cfg = p(d.path(), "bad.conf");
    std::fs::write(&bad_cfg, "episode_cap = 0\n").unwrap();
    let out = greenhouse(&["--config", &bad_cfg, "simulate", "--out", &p(d.path(), "l.jsonl")]);
    assert_eq!(out.status.code(), Some(1));
}

fn train(dir: &Path, name: &str, episodes: &str) {
    ok(&[
        "train",
        "--agent",
        "dqn",
        "--episodes",
        episodes,
        "--seed",
        "4",
        "--metrics",
        &p(dir, &format!("{name}.csv")),
        "--checkpoint",
        &p(dir, name),
        "--no-timing",
    ]);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn train_resume_eval_report() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path();
    train(root, "full", "120");
    train(root, "split", "70");
    train(root, "split", "120");

    let metrics = std::fs::read_to_string(root.join("full.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 121);
    assert!(metrics.starts_with("episode,score,epsilon,loss,seconds\n"));
    assert_eq!(metrics, std::fs::read_to_string(root.join("split.csv")).unwrap());
    let agent = |n: &str| files(&root.join(n).join("latest").join("agent"));
    assert_eq!(agent("full"), agent("split"));

    let eval = |ckpt: &str| {
        ok(&["eval", "--agent", "dqn", "--checkpoint", &p(root, ckpt), "--episodes", "20"])
    };
    let (label, n, _) = stats_row(&eval("full"));
    assert_eq!((label.as_str(), n), ("dqn", 20));
    assert_eq!(eval("full"), eval("split"));
    let wrong = greenhouse(&["eval", "--agent", "ac", "--checkpoint", &p(root, "full")]);
    assert_eq!(wrong.status.code(), Some(1));

    let summary = ok(&["report", "--metrics", &p(root, "full.csv"), "--out", &p(root, "curve.csv")]);
    assert!(summary.contains("episodes,120"));
    let curve = std::fs::read_to_string(root.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 121);

    // Corrupt the checkpoint: resuming must fail loudly, not start over.
    std::fs::write(root.join("full/latest/agent/qnet.net"), "mlp 1\ninput 7\n").unwrap();
    let out = greenhouse(&[
        "train",
        "--agent",
        "dqn",
        "--episodes",
        "130",
        "--seed",
        "4",
        "--metrics",
        &p(root, "again.csv"),
        "--checkpoint",
        &p(root, "full"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt checkpoint"));
}

#[test]
fn report_flat_and_empty() {
    let d = tempfile::tempdir().unwrap();
    let mut csv = String::from("episode,score,epsilon,loss,seconds\n");
    for e in 0..150 {
        csv.push_str(&format!("{e},12,0.5,,0\n"));
    }
    let m = p(d.path(), "m.csv");
    std::fs::write(&m, csv).unwrap();
    let summary = ok(&["report", "--metrics", &m, "--out", &p(d.path(), "c.csv"), "--threshold", "12,500"]);
    assert!(summary.contains("peak,12\n"));
    assert!(summary.contains("episodes_to_12,0\n"));
    assert!(summary.contains("episodes_to_500,none\n"));
    let curve = std::fs::read_to_string(d.path().join("c.csv")).unwrap();
    assert!(curve.lines().skip(1).all(|l| l.ends_with(",12")));

    std::fs::write(&m, "episode,score,epsilon,loss,seconds\n").unwrap();
    let out = greenhouse(&["report", "--metrics", &m, "--out", &p(d.path(), "c.csv")]);
    assert!(!out.status.success());
}
