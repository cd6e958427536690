use std::path::Path;
use std::process::Command;

fn vsdn(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vsdn")).args(args).current_dir(cwd).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const SMALL: &str = "[data]\nn_seq = 12\nhorizon = 1.0\n\n[model]\nd1 = 3\nd_h = 4\nmlp_hidden = 6\nmax_dt = 0.05\n\n[train]\nepochs = 2\nbatch_size = 4\npatience = 2\neval_samples = 2\n";

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    for name in ["a.csv", "b.csv"] {
        let (code, _, err) = vsdn(&["simulate-ou", "--config", "cfg.toml", "--seed", "7", "--out", name], dir.path());
        assert_eq!(code, 0, "{err}");
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    vsdn(&["--threads", "1", "simulate-ou", "--config", "cfg.toml", "--out", "one.csv"], dir.path());
    vsdn(&["--threads", "3", "simulate-ou", "--config", "cfg.toml", "--out", "three.csv"], dir.path());
    assert_eq!(std::fs::read(dir.path().join("one.csv")).unwrap(), std::fs::read(dir.path().join("three.csv")).unwrap());
}

#[test]
fn missing_config_exits_one_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = vsdn(&["train", "--config", "missing.cfg", "--out", "m.ckpt"], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("missing.cfg"), "{err}");
}

#[test]
fn unknown_subcommand_and_flag_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(vsdn(&["frobnicate"], dir.path()).0, 1);
    assert_eq!(vsdn(&["simulate-ou", "--bogus", "--out", "x.csv"], dir.path()).0, 1);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nepochz = 3\n").unwrap();
    let (code, _, err) = vsdn(&["train", "--config", "bad.toml", "--out", "m.ckpt"], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("epochz"), "{err}");
}

#[test]
fn kl_oracle_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = vsdn(&["verify", "kl-oracle", "--out", "kl.csv"], dir.path());
    assert_eq!(code, 0, "{out}{err}");
    let csv = std::fs::read_to_string(dir.path().join("kl.csv")).unwrap();
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[6] < 0.02);
}

#[test]
fn failed_tolerance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = vsdn(&["verify", "logw-identity", "--steps", "100", "--tol", "0", "--out", "l.csv"], dir.path());
    if out.contains("PASS") {
        assert_eq!(code, 0);
    } else {
        assert_eq!(code, 3);
    }
    let (code, out, _) = vsdn(&["verify", "euler", "--paths", "50", "--out", "e.csv"], dir.path());
    assert_eq!(code == 0, out.contains("PASS"));
}

#[test]
fn simulate_train_evaluate_interpolate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.toml"), SMALL).unwrap();
    let steps: [&[&str]; 5] = [
        &["simulate-ou", "--config", "cfg.toml", "--out", "data.csv"],
        &["train", "--config", "cfg.toml", "--data", "data.csv", "--out", "run/model.ckpt"],
        &["evaluate", "--checkpoint", "run/model.ckpt", "--task", "prediction", "--samples", "3", "--out", "pred.csv"],
        &["evaluate", "--checkpoint", "run/model.ckpt", "--task", "interpolation", "--samples", "3", "--out", "interp.csv"],
        &["interpolate", "--checkpoint", "run/model.ckpt", "--data", "data.csv", "--samples", "2", "--out", "dec.csv"],
    ];
    for args in steps {
        let (code, out, err) = vsdn(args, d);
        assert_eq!(code, 0, "{args:?}: {out}{err}");
    }
    let hist = std::fs::read_to_string(d.join("run/model.history.csv")).unwrap();
    assert!(hist.starts_with("epoch,split,vae_bound"));
    assert_eq!(hist.lines().count(), 1 + 2 * 2);
    let pred = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    assert!(pred.starts_with("task,nll_per_frame,mse,n_frames,wall_time\nprediction,"));
    let dec = std::fs::read_to_string(d.join("dec.csv")).unwrap();
    assert!(dec.starts_with("series_id,time,mean_1,mean_2,std_1,std_2\n"));
}
