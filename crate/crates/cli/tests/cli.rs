use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpg")).args(args).output().expect("spawn qpg")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes a tiny zero-mean config into `dir` and returns its path.
fn small_config(dir: &Path, algo: &str) -> String {
    let out = qpg(&["preset", "zero_mean_simple", "--algo", algo]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    cfg["episodes"] = 40.into();
    cfg["replications"] = 2.into();
    cfg["eval_episodes"] = 20.into();
    cfg["out_dir"] = dir.join("default_out").to_str().unwrap().into();
    let path = dir.join(format!("{algo}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn preset_listing_names_every_preset() {
    let out = qpg(&["preset"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["zero_mean_simple", "portfolio_desk", "inventory_desk"] {
        assert!(text.lines().any(|l| l == name), "{name} missing from {text}");
    }
}

#[test]
fn train_evaluate_compare_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "qpo");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = qpg(&["train", "--config", &cfg, "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["config.json", "manifest.json", "rep_000/metrics.csv", "rep_001/eval_returns.csv", "rep_001/checkpoint.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let metrics = fs::read_to_string(a.join("rep_000/metrics.csv")).unwrap();
    assert!(metrics.starts_with("episode,rolling_quantile,rolling_mean,accuracy,q_tracker"));
    assert_eq!(metrics, fs::read_to_string(b.join("rep_000/metrics.csv")).unwrap());

    let ckpt = a.join("rep_000/checkpoint.json");
    let eval = qpg(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "20"]);
    assert!(eval.status.success());
    let printed: Vec<f64> = stdout(&eval).lines().map(|l| l.parse().unwrap()).collect();
    let stored = fs::read_to_string(a.join("rep_000/eval_returns.csv")).unwrap();
    let stored: Vec<f64> = stored.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(printed, stored);

    let cmp = qpg(&["compare", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--alpha", "0.25"]);
    assert!(cmp.status.success());
    let table = stdout(&cmp);
    assert!(table.contains("q(0.25)"));
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    // same returns, so everything after the directory column matches
    let tail = |r: &str| r.split_whitespace().skip(1).collect::<Vec<_>>().join(" ");
    assert_eq!(tail(rows[0]), tail(rows[1]));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = qpg(&["train", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing file"));

    let cfg = small_config(tmp.path(), "ppo");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["algo"]["alpha"] = 1.5.into();
    fs::write(&cfg, v.to_string()).unwrap();
    let out = qpg(&["train", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("default_out").exists(), "invalid config must not start a run");

    let out = qpg(&["preset", "zero_mean_simple", "--algo", "dqn"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qpg(&["verify", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_runs_a_selected_criterion() {
    let out = qpg(&["verify", "8"]);
    let text = stdout(&out);
    assert!(text.contains("criterion 8 ["), "{text}");
    assert!(text.contains("verify: "));
}
