//! End-to-end pipeline through the binary: simulate, inject, score, evaluate,
//! tune, theory-check, sweep, and replay.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_odaudit"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SIM: &str = r#"
n_per_group = 80
base_rate = 0.1
dims_per_role = 5
proxy_mean_a = 5.0
proxy_mean_b = 20.0
culprit_inlier_mean = 0.0
culprit_outlier_mean = 3.0
std = 1.0
outlier_mode = "clustered"
scatter_factors = [3.0, 6.0, 9.0, 12.0, 15.0]
seed = 3
"#;

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    write(&p("sim.toml"), SIM);

    let out = bin()
        .args(["simulate", "--config"])
        .arg(p("sim.toml"))
        .arg("--out")
        .arg(p("data.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "simulate: {}", String::from_utf8_lossy(&out.stderr));
    assert!(p("data.csv").exists());
    assert!(p("data.meta.toml").exists());
    let header = std::fs::read_to_string(p("data.csv")).unwrap();
    assert!(header.starts_with("row,group,true_group,y,role:g1,"));

    let out = bin()
        .args(["inject", "--in"])
        .arg(p("data.csv"))
        .args(["--bias", "size_disparity", "--beta", "0.4", "--seed", "5", "--out"])
        .arg(p("biased.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "inject: {}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["fit-score", "--in"])
        .arg(p("biased.csv"))
        .args(["--detector", "lof", "--param", "k=20", "--out"])
        .arg(p("scores.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "fit-score: {}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["evaluate", "--scores"])
        .arg(p("scores.csv"))
        .arg("--data")
        .arg(p("biased.csv"))
        .args(["--grouping", "true", "--out"])
        .arg(p("report.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "evaluate: {}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(p("report.csv")).unwrap();
    assert!(report.starts_with(
        "scenario,beta,detector,seed,auroc,f1,fr_a,fr_b,tpr_a,tpr_b,fpr_a,fpr_b,\
         ppv_a,ppv_b,fr_ratio,tpr_ratio,fpr_ratio,ppv_ratio,bias_amp"
    ));
    assert_eq!(report.lines().count(), 2);

    let out = bin()
        .args(["tune", "--in"])
        .arg(p("data.csv"))
        .args(["--detector", "lof", "--seed", "2", "--out"])
        .arg(p("leaderboard.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "tune: {}", String::from_utf8_lossy(&out.stderr));
    let leaderboard = std::fs::read_to_string(p("leaderboard.csv")).unwrap();
    // The full neighbor grid is evaluated; cells with k >= n fail but stay
    // recorded.
    assert_eq!(leaderboard.lines().count(), 26);
    assert!(leaderboard.contains("true"));
}

#[test]
fn theory_check_writes_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let geom = dir.path().join("geom.toml");
    write(
        &geom,
        r#"
n_a = 1000
n_b = 1000
base_rate = 0.1
intra_a = 1.0
intra_b = 3.0
gap_a = 10.0
gap_b = 10.0
k = 150
dims = 48
"#,
    );
    let out_path = dir.path().join("verdicts.csv");
    let out = bin()
        .args(["theory-check", "--prop", "1", "--geom"])
        .arg(&geom)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "theory-check: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("a_higher"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict"));
}

#[test]
fn sweep_then_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    write(
        &plan,
        r#"
[sim]
n_per_group = 60
base_rate = 0.1
dims_per_role = 5
proxy_mean_a = 5.0
proxy_mean_b = 20.0
culprit_inlier_mean = 0.0
culprit_outlier_mean = 3.0
std = 1.0
outlier_mode = "clustered"
scatter_factors = [3.0, 6.0, 9.0, 12.0, 15.0]
seed = 0

[scenario]
kind = "size_disparity"
betas = [0.0, 0.4]
mode = "exact"

[run]
master_seed = 9
repeats_shallow = 2
repeats_deep = 1
grouping = "true"

[[detectors]]
detector = "lof"
k = 15
tune = false

[[detectors]]
detector = "iforest"
n_trees = 20
subsample = 64
seed = 0
tune = false
"#,
    );
    let out_dir = dir.path().join("results");
    let out = bin()
        .args(["sweep", "--plan"])
        .arg(&plan)
        .args(["--jobs", "2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "sweep: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("runs.csv").exists());
    assert!(out_dir.join("aggregate.csv").exists());
    assert!(out_dir.join("provenance.txt").exists());
    assert!(out_dir.join("plots").read_dir().unwrap().count() > 0);

    let out = bin()
        .args(["replay", "--record", "3", "--plan"])
        .arg(&plan)
        .arg("--runs")
        .arg(out_dir.join("runs.csv"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "replay: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("replay ok"));
}
