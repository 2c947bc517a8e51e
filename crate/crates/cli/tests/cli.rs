use std::path::Path;
use std::process::{Command, Output};

fn nehd(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nehd"))
        .args(args)
        .env("NEHD_OUTPUT_ROOT", root)
        .output()
        .expect("spawn nehd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_usage_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let help = nehd(tmp.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for sub in ["synth", "ingest", "featurize", "train", "evaluate", "gridsearch", "export-features", "count-params", "ablation"] {
        assert!(stdout(&help).contains(sub), "help is missing {sub}");
    }
    assert_eq!(nehd(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(nehd(tmp.path(), &["train"]).status.code(), Some(2));
}

#[test]
fn count_params_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    for (variant, want) in [("linear", "9220"), ("edge_only", "10453"), ("histogram_only", "9236"), ("nehd", "9389")] {
        let o = nehd(tmp.path(), &["count-params", "--variant", variant]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), want);
    }
    let o = nehd(tmp.path(), &["count-params", "--variant", "nehd", "--breakdown"]);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "hist.centers 8"), "{text}");
    assert_eq!(text.lines().last(), Some("9389"));
}

#[test]
fn errors_are_single_line_with_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nehd(tmp.path(), &["train", "--out", "t", "--manifest", "missing.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: kind="), "{err}");

    std::fs::write(tmp.path().join("bad.toml"), "seed = 1\nunknown_key = 2\n").unwrap();
    let cfg = tmp.path().join("bad.toml");
    let o = nehd(tmp.path(), &["synth", "--out", "s", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=config"), "{}", stderr(&o));
}

#[test]
fn train_evaluate_and_stft_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let o = nehd(root, &["synth", "--out", "corpus", "--per-class-sources", "10", "--duration", "6", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(root.join("corpus/manifest.jsonl").is_file());
    assert!(root.join("corpus/run.toml").is_file());

    let manifest = root.join("corpus/manifest.jsonl");
    let m = manifest.to_str().unwrap();
    let o = nehd(root, &["train", "--out", "model", "--manifest", m, "--variant", "linear", "--epochs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["model.ckpt", "history.csv", "run.toml"] {
        assert!(root.join("model").join(f).is_file(), "missing {f}");
    }
    let history = std::fs::read_to_string(root.join("model/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let ckpt = root.join("model/model.ckpt");
    let c = ckpt.to_str().unwrap();
    let o = nehd(root, &["evaluate", "--out", "eval", "--checkpoint", c, "--manifest", m]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("eval/metrics.json")).unwrap()).unwrap();
    let acc = metrics["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let o = nehd(root, &["evaluate", "--out", "eval2", "--checkpoint", c, "--manifest", m, "--window-length", "4096"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=config_mismatch"), "{}", stderr(&o));
}
