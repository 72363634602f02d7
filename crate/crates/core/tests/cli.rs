use std::path::Path;
use std::process::{Command, Output};

fn chac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chac")).args(args).output().expect("spawn chac")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).trim().to_string();
    assert_eq!(text.lines().count(), 1, "expected a one-line reason, got {text:?}");
    text
}

const TINY: &str = "\
env = PointReacher2D
k = 1
hidden = 16
fw_hidden = 16
batch_size = 32
updates_per_round = 2
episodes = 4
test_every = 2
test_batch_size = 3
seeds = 0, 1
";

fn train_tiny(dir: &Path) {
    let cfg = dir.join("run.txt");
    std::fs::write(&cfg, TINY).unwrap();
    let out = chac(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.join("runs").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_evaluate_aggregate_plot() {
    let dir = tempfile::tempdir().unwrap();
    train_tiny(dir.path());
    let runs = dir.path().join("runs");
    let m0 = runs.join("seed_0/metrics.csv");
    let m1 = runs.join("seed_1/metrics.csv");
    let header = std::fs::read_to_string(&m0).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "seed,episode,success_rate,critic_loss_l0,actor_objective_l0,fw_loss_l0,curiosity_mean_l0,r_min_l0,r_max_l0");

    let traj = dir.path().join("traj.csv");
    let ckpt = runs.join("seed_0/checkpoint");
    let out = chac(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "5", "--trajectory", traj.to_str().unwrap()]);
    assert!(out.status.success());
    let rate: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(std::fs::read_to_string(&traj).unwrap().starts_with("t,s0,s1,"));

    let agg = dir.path().join("agg.csv");
    let out = chac(&["aggregate", m0.to_str().unwrap(), m1.to_str().unwrap(), "--out", agg.to_str().unwrap(), "--label", "eta = 0.5"]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&agg).unwrap().starts_with("series,episode,success_rate_mean,success_rate_std,"));

    let svg = dir.path().join("curves.svg");
    let out = chac(&["plot", agg.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success());
    roxmltree::Document::parse(&std::fs::read_to_string(&svg).unwrap()).unwrap();
}

#[test]
fn single_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.txt");
    std::fs::write(&cfg, TINY).unwrap();
    let out = chac(&["train", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(dir.path().join("seed_9/metrics.csv").exists());
    assert!(!dir.path().join("seed_0").exists());
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    std::fs::write(&cfg, "k = 2\nlearning_rat = 0.1\n").unwrap();
    let out = chac(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).contains("learning_rat"));
}

#[test]
fn evaluate_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    train_tiny(dir.path());
    let ckpt = dir.path().join("runs/seed_0/checkpoint");
    let out = chac(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "0"]);
    assert!(!out.status.success());
    stderr_line(&out);

    let cfg = std::fs::read_to_string(ckpt.join("config.txt")).unwrap().replace("PointReacher2D", "ArmReacher3");
    std::fs::write(ckpt.join("config.txt"), cfg).unwrap();
    let out = chac(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "2"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).contains("checkpoint"));
}

#[test]
fn misaligned_aggregate_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "seed,episode,success_rate\n0,10,0.5\n").unwrap();
    std::fs::write(&b, "seed,episode,success_rate\n1,20,0.5\n").unwrap();
    let out = chac(&["aggregate", a.to_str().unwrap(), b.to_str().unwrap(), "--out", dir.path().join("o.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).contains("b.csv"));
}

#[test]
fn gradcheck_passes_and_reports() {
    let out = chac(&["gradcheck", "--networks", "5"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("max relative error"));
    let out = chac(&["gradcheck", "--networks", "2", "--tolerance", "0"]);
    assert!(!out.status.success());
    stderr_line(&out);
}
