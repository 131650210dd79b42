//! Robust aggregation of episode outcomes: interquartile mean, percentile
//! bootstrap intervals, and multi-policy evaluation runs.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::CwParams;
use crate::env::{
    derive_seed, run_episode, ActionVec, Controller, DvCurriculum, EpisodeConfig, EpisodeMetrics,
    InspectionEnv, Observation, Termination,
};
use crate::error::{EnvError, StatsError};
use crate::illumination::IlluminationMode;
use crate::policy::PolicyParams;

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 2000;
/// Default confidence level.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Mean of the samples left after dropping `floor(n/4)` from each end of
/// the sorted order.
pub fn iqm(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(iqm_sorted(&sorted))
}

fn iqm_sorted(sorted: &[f64]) -> f64 {
    let trim = sorted.len() / 4;
    let middle = &sorted[trim..sorted.len() - trim];
    // offsets from the first element keep constant data exact
    let base = middle[0];
    base + middle.iter().map(|v| v - base).sum::<f64>() / middle.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval of the IQM.
pub fn bootstrap_ci(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64), StatsError> {
    bootstrap_ci_with(samples, |s| iqm(s).unwrap_or(f64::NAN), resamples, level, seed)
}

/// Percentile bootstrap interval of an arbitrary statistic.
pub fn bootstrap_ci_with<F>(
    samples: &[f64],
    statistic: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if resamples == 0 {
        return Err(StatsError::ZeroResamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut draw = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for d in draw.iter_mut() {
            *d = samples[rng.random_range(0..n)];
        }
        stats.push(statistic(&draw));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha)))
}

/// IQM with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub iqm: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MetricSummary {
    /// Summarizes samples; a single sample yields a zero-width interval.
    pub fn from_samples(samples: &[f64], resamples: usize, seed: u64) -> Result<Self, StatsError> {
        let point = iqm(samples)?;
        let (lo, hi) = if samples.len() < 2 {
            (point, point)
        } else {
            bootstrap_ci(samples, resamples, DEFAULT_LEVEL, seed)?
        };
        // the percentile interval can exclude the point estimate on very
        // skewed samples; widen so the report always brackets it
        Ok(Self {
            iqm: point,
            ci_low: lo.min(point),
            ci_high: hi.max(point),
        })
    }
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    /// Identifies the policy (normally its training seed).
    pub seed: u64,
    pub trial: usize,
    pub episode_seed: u64,
    pub inspected_pct: f64,
    pub delta_v: f64,
    pub episode_length: f64,
    pub total_reward: f64,
    pub reason: Termination,
}

impl EpisodeRow {
    pub fn metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics {
            inspected_pct: self.inspected_pct,
            delta_v: self.delta_v,
            episode_length: self.episode_length,
            total_reward: self.total_reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub inspected_pct: MetricSummary,
    pub delta_v: MetricSummary,
    pub episode_length: MetricSummary,
    pub total_reward: MetricSummary,
}

impl MetricSet {
    pub fn from_metrics(rows: &[EpisodeMetrics], resamples: usize, seed: u64) -> Result<Self, StatsError> {
        let col = |f: fn(&EpisodeMetrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            inspected_pct: MetricSummary::from_samples(&col(|m| m.inspected_pct), resamples, derive_seed(seed, 0))?,
            delta_v: MetricSummary::from_samples(&col(|m| m.delta_v), resamples, derive_seed(seed, 1))?,
            episode_length: MetricSummary::from_samples(&col(|m| m.episode_length), resamples, derive_seed(seed, 2))?,
            total_reward: MetricSummary::from_samples(&col(|m| m.total_reward), resamples, derive_seed(seed, 3))?,
        })
    }

    pub fn rows(&self) -> [(&'static str, &MetricSummary); 4] {
        [
            ("inspected_pct", &self.inspected_pct),
            ("delta_v", &self.delta_v),
            ("episode_length", &self.episode_length),
            ("total_reward", &self.total_reward),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub metrics: MetricSet,
}

/// Pooled evaluation over every (policy seed, trial) episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: IlluminationMode,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub trials_per_seed: usize,
    pub samples: usize,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    pub pooled: MetricSet,
    pub per_seed: Vec<SeedSummary>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRow>,
}

impl EvalReport {
    pub fn from_rows(
        rows: Vec<EpisodeRow>,
        mode: IlluminationMode,
        master_seed: u64,
        trials_per_seed: usize,
        resamples: usize,
    ) -> Result<Self, StatsError> {
        let mut seeds: Vec<u64> = Vec::new();
        for r in &rows {
            if !seeds.contains(&r.seed) {
                seeds.push(r.seed);
            }
        }
        let all: Vec<EpisodeMetrics> = rows.iter().map(EpisodeRow::metrics).collect();
        let pooled = MetricSet::from_metrics(&all, resamples, master_seed)?;
        let per_seed = seeds
            .iter()
            .map(|&s| {
                let m: Vec<EpisodeMetrics> = rows.iter().filter(|r| r.seed == s).map(EpisodeRow::metrics).collect();
                Ok(SeedSummary {
                    seed: s,
                    metrics: MetricSet::from_metrics(&m, resamples, derive_seed(master_seed, s.wrapping_add(1)))?,
                })
            })
            .collect::<Result<Vec<_>, StatsError>>()?;
        Ok(Self {
            mode,
            master_seed,
            seeds,
            trials_per_seed,
            samples: rows.len(),
            bootstrap_resamples: resamples,
            confidence_level: DEFAULT_LEVEL,
            pooled,
            per_seed,
            episodes: rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Per-episode rows as CSV.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("seed,trial,episode_seed,inspected_pct,delta_v,episode_length,total_reward,reason\n");
        for r in &self.episodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.seed,
                r.trial,
                r.episode_seed,
                r.inspected_pct,
                r.delta_v,
                r.episode_length,
                r.total_reward,
                r.reason.as_str()
            );
        }
        out
    }
}

/// Deterministic (mean-action) policy controller.
#[derive(Debug, Clone)]
pub struct PolicyController<'a> {
    pub params: &'a PolicyParams,
}

impl Controller for PolicyController<'_> {
    fn act(&mut self, obs: &Observation, env: &InspectionEnv) -> ActionVec {
        let mean = self.params.action_mean(obs.as_slice());
        crate::policy::to_thrust(&mean, env.params().u_max)
    }
}

/// Evaluation run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub trials: usize,
    pub master_seed: u64,
    pub bootstrap_resamples: usize,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub workers: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            trials: 100,
            master_seed: 0,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            workers: 0,
        }
    }
}

/// Episode seed of trial `trial` for the policy labelled `seed`.
pub fn episode_seed(master: u64, seed: u64, trial: usize) -> u64 {
    derive_seed(derive_seed(master, seed), trial as u64)
}

/// Runs `trials` episodes for every labelled controller factory. Episodes
/// use the evaluation ΔV weight. Rows come back in (label, trial) order
/// regardless of thread count.
pub fn run_evaluation<C, F>(
    labels: &[u64],
    make_controller: F,
    episode: &EpisodeConfig,
    cw: &CwParams,
    settings: &EvalSettings,
) -> Result<Vec<EpisodeRow>, EnvError>
where
    C: Controller,
    F: Fn(usize, u64) -> C + Sync,
{
    let jobs: Vec<(usize, u64, usize)> = labels
        .iter()
        .enumerate()
        .flat_map(|(li, &s)| (0..settings.trials).map(move |t| (li, s, t)))
        .collect();
    // validate once so worker errors only come from stepping
    InspectionEnv::new(episode.clone(), *cw)?;
    let run_one = |env: &mut InspectionEnv, &(li, seed, trial): &(usize, u64, usize)| -> Result<EpisodeRow, EnvError> {
        let ep_seed = episode_seed(settings.master_seed, seed, trial);
        let mut controller = make_controller(li, ep_seed);
        env.set_dv_weight(DvCurriculum::EVAL);
        let (m, _) = run_episode(env, &mut controller, ep_seed)?;
        Ok(EpisodeRow {
            seed,
            trial,
            episode_seed: ep_seed,
            inspected_pct: m.inspected_pct,
            delta_v: m.delta_v,
            episode_length: m.episode_length,
            total_reward: m.total_reward,
            reason: env.state().reason,
        })
    };
    let make_env = || InspectionEnv::new(episode.clone(), *cw).expect("validated above");
    if settings.workers == 1 {
        let mut env = make_env();
        jobs.iter().map(|j| run_one(&mut env, j)).collect()
    } else {
        let body = || {
            jobs.par_iter()
                .map_init(make_env, run_one)
                .collect::<Result<Vec<_>, _>>()
        };
        if settings.workers == 0 {
            body()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(settings.workers)
                .build()
                .map(|pool| pool.install(body))
                .unwrap_or_else(|_| body())
        }
    }
}

/// Evaluates several frozen policies (one per training seed) and pools the
/// episodes into a single report.
pub fn evaluate_policies(
    policies: &[(u64, PolicyParams)],
    episode: &EpisodeConfig,
    cw: &CwParams,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    let labels: Vec<u64> = policies.iter().map(|(s, _)| *s).collect();
    let rows = run_evaluation(
        &labels,
        |li, _| PolicyController { params: &policies[li].1 },
        episode,
        cw,
        settings,
    )?;
    Ok(EvalReport::from_rows(
        rows,
        episode.illumination.mode,
        settings.master_seed,
        settings.trials,
        settings.bootstrap_resamples,
    )?)
}

/// Evaluates one policy under several seed streams.
pub fn evaluate_policy(
    params: &PolicyParams,
    episode: &EpisodeConfig,
    cw: &CwParams,
    trials: usize,
    seeds: &[u64],
) -> Result<EvalReport, EvalError> {
    let policies: Vec<(u64, PolicyParams)> = seeds.iter().map(|&s| (s, params.clone())).collect();
    evaluate_policies(
        &policies,
        episode,
        cw,
        &EvalSettings {
            trials,
            ..EvalSettings::default()
        },
    )
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Published long-run results for a fully trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    pub mode: IlluminationMode,
    pub inspected_pct: (f64, f64, f64),
    pub delta_v: (f64, f64, f64),
    pub episode_length: (f64, f64, f64),
    pub total_reward: (f64, f64, f64),
}

/// Reference numbers as (IQM, CI low, CI high).
pub const REFERENCE_BINARY: ReferenceResult = ReferenceResult {
    mode: IlluminationMode::Binary,
    inspected_pct: (99.83, 99.74, 99.91),
    delta_v: (18.08, 17.80, 18.37),
    episode_length: (3217.0, 3199.0, 3236.0),
    total_reward: (7.885, 7.856, 7.913),
};

pub const REFERENCE_SPECTRAL: ReferenceResult = ReferenceResult {
    mode: IlluminationMode::Spectral,
    inspected_pct: (98.82, 98.45, 99.13),
    delta_v: (16.25, 16.01, 16.50),
    episode_length: (3181.0, 3159.0, 3202.0),
    total_reward: (7.890, 7.856, 7.921),
};

/// Allowed absolute gap on inspected percentage (percentage points).
pub const INSPECTED_TOLERANCE_PP: f64 = 2.0;
/// Allowed relative gap on ΔV.
pub const DELTA_V_TOLERANCE_REL: f64 = 0.30;

pub fn reference_for(mode: IlluminationMode) -> ReferenceResult {
    match mode {
        IlluminationMode::Binary => REFERENCE_BINARY,
        IlluminationMode::Spectral => REFERENCE_SPECTRAL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub measured: MetricSummary,
    pub reference: (f64, f64, f64),
    /// Human-readable tolerance, or "report only".
    pub tolerance: String,
    pub pass: Option<bool>,
}

/// Compares a report against the published numbers for its mode.
pub fn compare_to_reference(report: &EvalReport) -> Vec<ComparisonRow> {
    let r = reference_for(report.mode);
    let p = &report.pooled;
    vec![
        ComparisonRow {
            metric: "inspected_pct",
            measured: p.inspected_pct,
            reference: r.inspected_pct,
            tolerance: format!("±{INSPECTED_TOLERANCE_PP} pp"),
            pass: Some((p.inspected_pct.iqm - r.inspected_pct.0).abs() <= INSPECTED_TOLERANCE_PP),
        },
        ComparisonRow {
            metric: "delta_v",
            measured: p.delta_v,
            reference: r.delta_v,
            tolerance: format!("±{:.0}%", DELTA_V_TOLERANCE_REL * 100.0),
            pass: Some((p.delta_v.iqm - r.delta_v.0).abs() <= DELTA_V_TOLERANCE_REL * r.delta_v.0),
        },
        ComparisonRow {
            metric: "episode_length",
            measured: p.episode_length,
            reference: r.episode_length,
            tolerance: "report only".into(),
            pass: None,
        },
        ComparisonRow {
            metric: "total_reward",
            measured: p.total_reward,
            reference: r.total_reward,
            tolerance: "report only".into(),
            pass: None,
        },
    ]
}

/// Markdown table of a comparison.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("| metric | measured IQM [95% CI] | reference IQM [95% CI] | tolerance | result |\n|---|---|---|---|---|\n");
    for r in rows {
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(
            out,
            "| {} | {:.3} [{:.3}, {:.3}] | {} [{}, {}] | {} | {} |",
            r.metric,
            r.measured.iqm,
            r.measured.ci_low,
            r.measured.ci_high,
            r.reference.0,
            r.reference.1,
            r.reference.2,
            r.tolerance,
            verdict
        );
    }
    out
}
