use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use inspect_core::evaluation::iqm;

const SMALL: &str = r#"
[episode]
point_count = 20
max_steps = 60

[train]
rollout_steps = 100
minibatch_size = 50
epochs = 2
num_envs = 2
workers = 1
hidden = [8]
eval_interval = 100
eval_episodes = 2
checkpoint_interval = 0

[eval]
trials = 3
workers = 1
bootstrap_resamples = 200
"#;

fn inspect(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inspect"))
        .args(args)
        .current_dir(root)
        .env("INSPECT_OUTPUT_ROOT", root.join("out"))
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .flatten()
        .filter(|e| e.path().is_file())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn config_init_writes_parseable_defaults() {
    let dir = setup();
    ok(&inspect(dir.path(), &["config", "init", "--out", "c.toml"]));
    let text = fs::read_to_string(dir.path().join("c.toml")).unwrap();
    assert!(text.contains("[sun_sync]") && text.contains("mean_motion = 0.001027"));
    // refuses to clobber
    let again = inspect(dir.path(), &["config", "init", "--out", "c.toml"]);
    assert!(!again.status.success());
    ok(&inspect(dir.path(), &["baseline", "--config", "c.toml", "--seeds", "0"]));
}

#[test]
fn missing_config_fails_without_outputs() {
    let dir = setup();
    let out = inspect(dir.path(), &["train", "--config", "nope.toml", "--out", "t"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[config]"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = setup();
    fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = inspect(dir.path(), &["baseline", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn train_is_byte_identical_across_runs() {
    let dir = setup();
    for out in ["a", "b"] {
        ok(&inspect(
            dir.path(),
            &["train", "--config", "small.toml", "--seeds", "0..2", "--timesteps", "200", "--out", out],
        ));
    }
    let a = read_dir_sorted(&dir.path().join("out/a"));
    let b = read_dir_sorted(&dir.path().join("out/b"));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "checkpoint_seed0.json",
            "checkpoint_seed1.json",
            "config.toml",
            "curve_seed0.csv",
            "curve_seed1.csv",
            "manifest.json"
        ]
    );
    assert_eq!(a, b);
}

#[test]
fn export_plots_aggregates_and_lists_missing_seeds() {
    let dir = setup();
    ok(&inspect(
        dir.path(),
        &["train", "--config", "small.toml", "--seeds", "0..3", "--timesteps", "200", "--out", "r"],
    ));
    ok(&inspect(dir.path(), &["export-plots", "--run", "r"]));
    let plots = dir.path().join("out/r/plots");
    let mut grids = Vec::new();
    for metric in ["inspected_pct", "delta_v", "episode_length", "total_reward"] {
        let text = fs::read_to_string(plots.join(format!("{metric}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        grids.push(rows.iter().map(|r| r.split(',').next().unwrap().to_string()).collect::<Vec<_>>());
    }
    assert!(grids.windows(2).all(|w| w[0] == w[1]));

    // recompute the IQM column from the per-seed curves
    let per_seed: Vec<Vec<f64>> = (0..3)
        .map(|s| {
            let text = fs::read_to_string(dir.path().join(format!("out/r/curve_seed{s}.csv"))).unwrap();
            text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
        })
        .collect();
    let text = fs::read_to_string(plots.join("inspected_pct.csv")).unwrap();
    for (i, row) in text.lines().filter(|l| !l.starts_with('#')).skip(1).enumerate() {
        let got: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        let samples: Vec<f64> = per_seed.iter().map(|c| c[i]).collect();
        assert_eq!(got, iqm(&samples).unwrap());
    }

    let single = inspect(dir.path(), &["export-plots", "--run", "r", "--seeds", "1", "--out", "one"]);
    ok(&single);
    let text = fs::read_to_string(dir.path().join("out/one/delta_v.csv")).unwrap();
    assert!(text.contains("single seed"));

    let missing = inspect(dir.path(), &["export-plots", "--run", "r", "--seeds", "0..6"]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("seeds: 3, 4, 5"));
}

#[test]
fn eval_writes_report_and_comparison() {
    let dir = setup();
    ok(&inspect(
        dir.path(),
        &["train", "--config", "small.toml", "--seeds", "0..2", "--timesteps", "100", "--out", "r"],
    ));
    let out = inspect(dir.path(), &["eval", "--config", "small.toml", "--run", "r"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("| inspected_pct |"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/r/eval_binary/eval_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["samples"], 6);
    let p = &report["pooled"]["inspected_pct"];
    assert!(p["ci_low"].as_f64() <= p["iqm"].as_f64() && p["iqm"].as_f64() <= p["ci_high"].as_f64());
    let csv = fs::read_to_string(dir.path().join("out/r/eval_binary/eval_episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn baseline_logs_respect_the_horizon() {
    let dir = setup();
    ok(&inspect(dir.path(), &["baseline", "--controller", "random", "--seeds", "0..3", "--out", "rnd"]));
    for s in 0..3 {
        let text = fs::read_to_string(dir.path().join(format!("out/rnd/trajectories/seed{s}.jsonl"))).unwrap();
        assert!(text.lines().count() <= 1224);
    }
    let out = inspect(dir.path(), &["baseline", "--seeds", "0..3", "--mode", "binary"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3/3 episodes fully inspected"));
}

#[test]
fn absolute_out_ignores_output_root() {
    let dir = setup();
    let abs = dir.path().join("elsewhere");
    ok(&inspect(
        dir.path(),
        &["baseline", "--controller", "zero_thrust", "--seeds", "0", "--out", abs.to_str().unwrap()],
    ));
    assert!(abs.join("report.json").exists());
    assert!(!dir.path().join("out").exists());
}
