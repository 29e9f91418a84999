use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[scenario]
n_subcarriers = 256
cir_taps = 16

[train]
epochs = 2
batch_size = 8
"#;

fn locnet(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("small.toml");
    if !config.exists() {
        std::fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_locnet"))
        .current_dir(dir)
        .env_remove("LOCNET_CONFIG")
        .arg("--config")
        .arg(&config)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// gen-dataset, train and eval in `dir`; returns the produced files.
fn pipeline(dir: &Path, threads: &str) -> Vec<PathBuf> {
    let run = |args: &[&str]| {
        let out = locnet(dir, &[&["--threads", threads], args].concat());
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    };
    run(&["gen-dataset", "--out", "d.lnet", "--samples", "60", "--seed", "5"]);
    run(&["train", "--dataset", "d.lnet", "--out", "run"]);
    run(&["eval", "--checkpoint", "run/model.lnwt", "--dataset", "d.lnet", "--test-split", "--out", "ev"]);
    ["d.lnet", "run/model.lnwt", "run/history.csv", "ev/cdf.csv", "ev/summary.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}

#[test]
fn pipeline_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path(), "1");
    let second = pipeline(b.path(), "2");
    for (x, y) in first.iter().zip(&second) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{} differs", x.display());
    }
    let manifest = std::fs::read_to_string(a.path().join("run/manifest.toml")).unwrap();
    assert!(manifest.contains("sha256"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = locnet(dir.path(), &["train", "--out", "run"]);
    assert_eq!(code(&out), 2);
    let out = locnet(dir.path(), &["gen-dataset", "--out", "d.lnet", "--encoding", "cfr"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown encoding"));
}

#[test]
fn unknown_config_keys_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scenario]\nn_trps = 3\n").unwrap();
    let out = locnet(dir.path(), &["--config", bad.to_str().unwrap(), "gen-scenario", "--out", "s"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_or_corrupt_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = locnet(dir.path(), &["eval", "--checkpoint", "nope.lnwt", "--dataset", "nope.lnet"]);
    assert_eq!(code(&out), 3);
    std::fs::write(dir.path().join("junk.lnet"), b"LNETjunk").unwrap();
    std::fs::write(dir.path().join("junk.lnwt"), b"LNWTjunk").unwrap();
    let out = locnet(dir.path(), &["eval", "--checkpoint", "junk.lnwt", "--dataset", "junk.lnet"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn broken_gradients_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = locnet(dir.path(), &["gradcheck", "--seeds", "1", "--inject-broken", "dense"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("dense"));
    let out = locnet(dir.path(), &["gradcheck", "--seeds", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn encoding_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (file, enc) in [("cir.lnet", "cir"), ("rsrp.lnet", "cir-rsrp")] {
        let out = locnet(d, &["gen-dataset", "--out", file, "--samples", "30", "--encoding", enc]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let out = locnet(d, &["train", "--dataset", "cir.lnet", "--out", "run", "--epochs", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = locnet(d, &["eval", "--checkpoint", "run/model.lnwt", "--dataset", "rsrp.lnet"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("trained on cir inputs"), "{}", stderr(&out));
}

#[test]
fn gen_scenario_writes_layout_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = locnet(dir.path(), &["gen-scenario", "--out", "s", "--ues", "10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trps = std::fs::read_to_string(dir.path().join("s/trps.csv")).unwrap();
    assert_eq!(trps.lines().count(), 9);
    let ues = std::fs::read_to_string(dir.path().join("s/ues.csv")).unwrap();
    assert_eq!(ues.lines().count(), 11);
}
