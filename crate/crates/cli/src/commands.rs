use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use inspect_core::baseline::{make_baseline, BaselineKind};
use inspect_core::env::{run_episode, write_trajectory, DvCurriculum, InspectionEnv};
use inspect_core::evaluation::{
    compare_to_reference, comparison_table, evaluate_policies, EpisodeRow, EvalReport, MetricSummary,
};
use inspect_core::illumination::IlluminationModel;
use inspect_core::policy::{read_curve_csv, write_curve_csv, Checkpoint, CurvePoint, Trainer};
use serde_json::json;

use crate::config::RunConfig;
use crate::seeds::SeedList;
use crate::Common;

#[derive(Debug, Clone, Copy)]
pub enum Category {
    Config,
    Input,
    Io,
    Runtime,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Input => "input",
            Self::Io => "io",
            Self::Runtime => "runtime",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Self::Config => 3,
            Self::Input => 4,
            Self::Io => 5,
            Self::Runtime => 6,
        }
    }
}

pub struct CliError {
    pub category: Category,
    pub source: anyhow::Error,
}

pub type CliResult = Result<(), CliError>;

trait Categorize<T> {
    fn cat(self, category: Category) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Categorize<T> for Result<T, E> {
    fn cat(self, category: Category) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            category,
            source: e.into(),
        })
    }
}

fn input_err(msg: String) -> CliError {
    CliError {
        category: Category::Input,
        source: anyhow!(msg),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p).cat(Category::Config),
        None => Ok(RunConfig::default()),
    }
}

fn apply_common(cfg: &mut RunConfig, common: &Common) -> Result<(), CliError> {
    if let Some(mode) = common.mode {
        let mut model = IlluminationModel::with_mode(mode);
        model.material = cfg.episode.illumination.material;
        model.light = cfg.episode.illumination.light;
        model.window = cfg.episode.illumination.window;
        cfg.episode.illumination = model;
    }
    cfg.validate().cat(Category::Config)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .cat(Category::Io)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .cat(Category::Io)
}

fn write_manifest(dir: &Path, value: serde_json::Value) -> CliResult {
    let text = serde_json::to_string_pretty(&value).expect("manifest serializes") + "\n";
    write_file(&dir.join("manifest.json"), text)
}

fn checkpoint_name(seed: u64) -> String {
    format!("checkpoint_seed{seed}.json")
}

fn curve_name(seed: u64) -> String {
    format!("curve_seed{seed}.csv")
}

/// Seeds whose files named by `name` exist in `dir`, sorted.
fn discover_seeds(dir: &Path, prefix: &str, suffix: &str) -> Vec<u64> {
    let mut seeds: Vec<u64> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix(prefix)?.strip_suffix(suffix)?.parse().ok()
        })
        .collect();
    seeds.sort_unstable();
    seeds
}

fn missing_error(what: &str, dir: &Path, missing: &[u64]) -> CliError {
    let list: Vec<String> = missing.iter().map(u64::to_string).collect();
    input_err(format!("missing {what} in {} for seeds: {}", dir.display(), list.join(", ")))
}

pub fn train(common: &Common, seeds: &SeedList, timesteps: Option<u64>, workers: Option<usize>, resume: bool) -> CliResult {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(t) = timesteps {
        cfg.train.total_timesteps = t;
    }
    if let Some(w) = workers {
        cfg.train.workers = w;
    }
    apply_common(&mut cfg, common)?;
    let out = cfg.resolve_out(common.out.as_deref().unwrap_or(Path::new("train")));
    create_dir(&out)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;

    let mut files = vec!["config.toml".to_string()];
    for &seed in &seeds.0 {
        let ckpt_path = out.join(checkpoint_name(seed));
        let mut trainer = if resume && ckpt_path.exists() {
            let ckpt = Checkpoint::load(&ckpt_path).cat(Category::Input)?;
            eprintln!("seed {seed}: resuming at {} steps", ckpt.timesteps);
            Trainer::from_checkpoint(ckpt).cat(Category::Input)?
        } else {
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            Trainer::new(tc, cfg.episode.clone(), cfg.dynamics).cat(Category::Config)?
        };
        trainer.set_checkpoint_path(Some(ckpt_path.clone()));
        let total = cfg.train.total_timesteps;
        let mut last_report = 0;
        trainer
            .run_until(total, |r| {
                if r.timesteps >= last_report + 50_000 || r.timesteps >= total {
                    last_report = r.timesteps;
                    let pct = r.mean_inspected_pct.map_or("-".into(), |p| format!("{p:.1}"));
                    eprintln!(
                        "seed {seed}: {} / {total} steps, train inspected {pct}%, w {:.5}, {}",
                        r.timesteps, r.dv_weight, r.stats
                    );
                }
            })
            .cat(Category::Runtime)?;
        trainer.checkpoint().save(&ckpt_path).cat(Category::Io)?;
        let curve_path = out.join(curve_name(seed));
        write_curve_csv(&curve_path, trainer.curve())
            .with_context(|| format!("cannot write {}", curve_path.display()))
            .cat(Category::Io)?;
        files.push(checkpoint_name(seed));
        files.push(curve_name(seed));
    }
    files.push("manifest.json".into());
    write_manifest(
        &out,
        json!({
            "command": "train",
            "version": env!("CARGO_PKG_VERSION"),
            "seeds": seeds.0,
            "mode": cfg.episode.illumination.mode,
            "total_timesteps": cfg.train.total_timesteps,
            "files": files,
            "config": cfg,
        }),
    )?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn eval(
    common: &Common,
    run: &Path,
    seeds: Option<&SeedList>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    workers: Option<usize>,
) -> CliResult {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(t) = trials {
        cfg.eval.trials = t;
    }
    if let Some(s) = master_seed {
        cfg.eval.master_seed = s;
    }
    if let Some(w) = workers {
        cfg.eval.workers = w;
    }
    cfg.validate().cat(Category::Config)?;
    let run_dir = cfg.resolve_out(run);
    let seeds = match seeds {
        Some(s) => s.0.clone(),
        None => discover_seeds(&run_dir, "checkpoint_seed", ".json"),
    };
    if seeds.is_empty() {
        return Err(input_err(format!("no checkpoints found in {}", run_dir.display())));
    }
    let missing: Vec<u64> = seeds
        .iter()
        .copied()
        .filter(|s| !run_dir.join(checkpoint_name(*s)).exists())
        .collect();
    if !missing.is_empty() {
        return Err(missing_error("checkpoints", &run_dir, &missing));
    }
    let mut policies = Vec::new();
    let mut episode = None;
    let mut dynamics = None;
    for &s in &seeds {
        let path = run_dir.join(checkpoint_name(s));
        let ckpt = Checkpoint::load(&path)
            .with_context(|| format!("cannot load {}", path.display()))
            .cat(Category::Input)?;
        episode.get_or_insert_with(|| ckpt.episode.clone());
        dynamics.get_or_insert(ckpt.dynamics);
        policies.push((s, ckpt.policy().clone()));
    }
    cfg.episode = episode.expect("at least one checkpoint");
    cfg.dynamics = dynamics.expect("at least one checkpoint");
    apply_common(&mut cfg, common)?;
    let mode = cfg.episode.illumination.mode;

    let report = evaluate_policies(&policies, &cfg.episode, &cfg.dynamics, &cfg.eval).cat(Category::Runtime)?;
    let table = comparison_table(&compare_to_reference(&report));

    let default_out = run_dir.join(format!("eval_{mode}"));
    let out = common.out.as_deref().map_or(default_out, |o| cfg.resolve_out(o));
    create_dir(&out)?;
    write_file(&out.join("eval_report.json"), report.to_json())?;
    write_file(&out.join("eval_episodes.csv"), report.episodes_csv())?;
    let mut md = format!(
        "# Evaluation ({mode}, {} seeds x {} trials, ΔV weight {})\n\n",
        seeds.len(),
        cfg.eval.trials,
        DvCurriculum::EVAL
    );
    md.push_str(&table);
    write_file(&out.join("comparison.md"), &md)?;
    write_manifest(
        &out,
        json!({
            "command": "eval",
            "version": env!("CARGO_PKG_VERSION"),
            "run": run_dir,
            "seeds": seeds,
            "mode": mode,
            "eval": cfg.eval,
            "files": ["eval_report.json", "eval_episodes.csv", "comparison.md", "manifest.json"],
        }),
    )?;
    print!("{md}");
    Ok(())
}

pub fn baseline(common: &Common, kind: BaselineKind, seeds: &SeedList) -> CliResult {
    let mut cfg = load_config(common.config.as_deref())?;
    apply_common(&mut cfg, common)?;
    let mode = cfg.episode.illumination.mode;
    let default_out = PathBuf::from(format!("baseline_{kind}_{mode}"));
    let out = cfg.resolve_out(common.out.as_deref().unwrap_or(&default_out));
    let mut env = InspectionEnv::new(cfg.episode.clone(), cfg.dynamics).cat(Category::Config)?;
    env.set_dv_weight(DvCurriculum::EVAL);

    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &seed in &seeds.0 {
        let mut controller = make_baseline(kind, &cfg.sun_sync, seed);
        let (m, log) = run_episode(&mut env, &mut controller, seed).cat(Category::Runtime)?;
        rows.push(EpisodeRow {
            seed,
            trial: 0,
            episode_seed: seed,
            inspected_pct: m.inspected_pct,
            delta_v: m.delta_v,
            episode_length: m.episode_length,
            total_reward: m.total_reward,
            reason: env.state().reason,
        });
        logs.push((seed, log));
    }
    let report = EvalReport::from_rows(rows, mode, 0, 1, cfg.eval.bootstrap_resamples).cat(Category::Runtime)?;

    let traj_dir = out.join("trajectories");
    create_dir(&traj_dir)?;
    for (seed, log) in &logs {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, log).cat(Category::Io)?;
        write_file(&traj_dir.join(format!("seed{seed}.jsonl")), buf)?;
    }
    write_file(&out.join("report.json"), report.to_json())?;
    write_file(&out.join("episodes.csv"), report.episodes_csv())?;
    write_manifest(
        &out,
        json!({
            "command": "baseline",
            "version": env!("CARGO_PKG_VERSION"),
            "controller": kind,
            "seeds": seeds.0,
            "mode": mode,
            "files": ["report.json", "episodes.csv", "trajectories/", "manifest.json"],
            "config": cfg,
        }),
    )?;
    let complete = report.episodes.iter().filter(|r| r.inspected_pct >= 100.0).count();
    println!(
        "{kind} ({mode}): {complete}/{} episodes fully inspected, inspected IQM {:.2}% [{:.2}, {:.2}], min {:.2}%",
        report.samples,
        report.pooled.inspected_pct.iqm,
        report.pooled.inspected_pct.ci_low,
        report.pooled.inspected_pct.ci_high,
        report.episodes.iter().map(|r| r.inspected_pct).fold(f64::INFINITY, f64::min),
    );
    Ok(())
}

const METRICS: [(&str, fn(&CurvePoint) -> f64); 4] = [
    ("inspected_pct", |p| p.inspected_pct),
    ("delta_v", |p| p.delta_v),
    ("episode_length", |p| p.episode_length),
    ("total_reward", |p| p.total_reward),
];

pub fn export_plots(config: Option<&Path>, run: &Path, seeds: Option<&SeedList>, out: Option<&Path>) -> CliResult {
    let cfg = load_config(config)?;
    let run_dir = cfg.resolve_out(run);
    let seeds: Vec<u64> = match seeds {
        Some(s) => s.0.clone(),
        None => manifest_seeds(&run_dir).unwrap_or_else(|| discover_seeds(&run_dir, "curve_seed", ".csv")),
    };
    if seeds.is_empty() {
        return Err(input_err(format!("no training curves found in {}", run_dir.display())));
    }
    let missing: Vec<u64> = seeds
        .iter()
        .copied()
        .filter(|s| !run_dir.join(curve_name(*s)).exists())
        .collect();
    if !missing.is_empty() {
        return Err(missing_error("training curves", &run_dir, &missing));
    }
    let mut curves = Vec::new();
    for &s in &seeds {
        let path = run_dir.join(curve_name(s));
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))
            .cat(Category::Io)?;
        let curve = read_curve_csv(&text).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        curves.push((s, curve));
    }
    let grid: Vec<u64> = curves[0].1.iter().map(|p| p.timestep).collect();
    for (s, c) in &curves {
        let g: Vec<u64> = c.iter().map(|p| p.timestep).collect();
        if g != grid {
            return Err(input_err(format!(
                "curve for seed {s} has a different timestep grid than seed {}",
                curves[0].0
            )));
        }
    }

    let out = out.map_or_else(|| run_dir.join("plots"), |o| cfg.resolve_out(o));
    create_dir(&out)?;
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let resamples = cfg.eval.bootstrap_resamples;
    for (mi, (name, get)) in METRICS.iter().enumerate() {
        let mut text = format!("# metric: {name}\n# seeds: {}\n", seed_list.join(","));
        if seeds.len() == 1 {
            text.push_str("# single seed: iqm is that seed's value and ci_low = ci_high = iqm (no interval)\n");
        } else {
            let _ = writeln!(
                text,
                "# interval: 95% percentile bootstrap of the IQM across seeds, {resamples} resamples"
            );
        }
        text.push_str("timestep,iqm,ci_low,ci_high\n");
        for (ti, &t) in grid.iter().enumerate() {
            let values: Vec<f64> = curves.iter().map(|(_, c)| get(&c[ti])).collect();
            let seed = inspect_core::env::derive_seed(cfg.eval.master_seed, (mi as u64) << 32 | ti as u64);
            let m = MetricSummary::from_samples(&values, resamples, seed).cat(Category::Runtime)?;
            let _ = writeln!(text, "{t},{},{},{}", m.iqm, m.ci_low, m.ci_high);
        }
        write_file(&out.join(format!("{name}.csv")), text)?;
    }
    eprintln!("wrote {} metric tables to {}", METRICS.len(), out.display());
    Ok(())
}

fn manifest_seeds(dir: &Path) -> Option<Vec<u64>> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("seeds")?.as_array()?.iter().map(|s| s.as_u64()).collect()
}

pub fn config_init(out: &Path, force: bool) -> CliResult {
    if out.exists() && !force {
        return Err(input_err(format!("{} already exists (pass --force to overwrite)", out.display())));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out, RunConfig::default().to_toml())?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
