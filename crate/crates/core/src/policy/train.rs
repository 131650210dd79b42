//! Rollout collection, curriculum, periodic evaluation and checkpointing
//! around [`PpoLearner`].

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::actor_critic::PolicyParams;
use super::checkpoint::Checkpoint;
use super::gae::compute_gae;
use super::ppo::{PpoLearner, RolloutBatch, TrainConfig, UpdateStats};
use crate::dynamics::CwParams;
use crate::env::{derive_seed, DvCurriculum, EnvironmentState, EpisodeConfig, EpisodeMetrics, InspectionEnv};
use crate::error::PolicyError;
use crate::evaluation::{run_evaluation, EvalSettings, PolicyController};

/// Completed training episodes averaged for the curriculum signal.
pub const CURRICULUM_EPISODES: usize = 100;

const EVAL_STREAM: u64 = 0xE7A1;
const LEARNER_STREAM: u64 = 0x1EA2;
const INIT_STREAM: u64 = 0x1417;

/// Mean evaluation metrics at one point of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub timestep: u64,
    pub dv_weight: f64,
    pub inspected_pct: f64,
    pub delta_v: f64,
    pub episode_length: f64,
    pub total_reward: f64,
}

impl CurvePoint {
    fn from_episodes(timestep: u64, dv_weight: f64, eps: &[EpisodeMetrics]) -> Self {
        let n = eps.len().max(1) as f64;
        let mean = |f: fn(&EpisodeMetrics) -> f64| eps.iter().map(f).sum::<f64>() / n;
        Self {
            timestep,
            dv_weight,
            inspected_pct: mean(|m| m.inspected_pct),
            delta_v: mean(|m| m.delta_v),
            episode_length: mean(|m| m.episode_length),
            total_reward: mean(|m| m.total_reward),
        }
    }

    pub const CSV_HEADER: &'static str = "timestep,dv_weight,inspected_pct,delta_v,episode_length,total_reward";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.timestep, self.dv_weight, self.inspected_pct, self.delta_v, self.episode_length, self.total_reward
        )
    }
}

/// Serializable part of a rollout worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub index: usize,
    pub env: EnvironmentState,
    pub rng: ChaCha8Rng,
    pub episodes: u64,
}

struct RolloutWorker {
    index: usize,
    env: InspectionEnv,
    rng: ChaCha8Rng,
    episodes: u64,
    seed_root: u64,
}

struct Segment {
    batch: RolloutBatch,
    finished: Vec<f64>,
}

impl RolloutWorker {
    fn new(index: usize, master: u64, episode: &EpisodeConfig, cw: &CwParams) -> Result<Self, PolicyError> {
        let seed_root = derive_seed(master, index as u64 + 1);
        let mut w = Self {
            index,
            env: InspectionEnv::new(episode.clone(), *cw)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed_root, u64::MAX)),
            episodes: 0,
            seed_root,
        };
        w.env.reset(derive_seed(seed_root, 0));
        Ok(w)
    }

    fn state(&self) -> WorkerState {
        WorkerState {
            index: self.index,
            env: self.env.state().clone(),
            rng: self.rng.clone(),
            episodes: self.episodes,
        }
    }

    fn collect(&mut self, params: &PolicyParams, steps: usize, dv_weight: f64, cfg: &TrainConfig) -> Result<Segment, PolicyError> {
        let u_max = self.env.params().u_max;
        self.env.set_dv_weight(dv_weight);
        let mut batch = RolloutBatch::default();
        let mut finished = Vec::new();
        let mut obs = self.env.observation();
        for _ in 0..steps {
            let out = params.act_obs(&obs, true, u_max, &mut self.rng)?;
            let res = self.env.step(out.action)?;
            batch.observations.push(obs.as_slice().to_vec());
            batch.actions.push(out.raw);
            batch.log_probs.push(out.log_prob);
            batch.values.push(out.value);
            batch.rewards.push(res.reward.total);
            batch.dones.push(res.done);
            if res.done {
                finished.push(self.env.metrics().inspected_pct);
                self.episodes += 1;
                obs = self.env.reset(derive_seed(self.seed_root, self.episodes));
            } else {
                obs = res.observation;
            }
        }
        let bootstrap = if batch.dones.last().copied().unwrap_or(true) {
            0.0
        } else {
            params.value(obs.as_slice())
        };
        let (adv, ret) = compute_gae(&batch.rewards, &batch.values, &batch.dones, bootstrap, cfg.gamma, cfg.gae_lambda);
        batch.advantages = adv;
        batch.returns = ret;
        Ok(Segment { batch, finished })
    }
}

/// Serializable trainer progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub learner: PpoLearner,
    pub curriculum: DvCurriculum,
    pub timesteps: u64,
    pub iterations: u64,
    pub recent_inspected: VecDeque<f64>,
    pub curve: Vec<CurvePoint>,
    pub next_eval: u64,
    pub next_checkpoint: u64,
    pub workers: Vec<WorkerState>,
}

/// Summary of one rollout-and-update iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationReport {
    pub timesteps: u64,
    pub episodes_finished: usize,
    pub mean_inspected_pct: Option<f64>,
    pub dv_weight: f64,
    pub stats: UpdateStats,
}

pub struct Trainer {
    cfg: TrainConfig,
    episode: EpisodeConfig,
    cw: CwParams,
    learner: PpoLearner,
    curriculum: DvCurriculum,
    workers: Vec<RolloutWorker>,
    timesteps: u64,
    iterations: u64,
    recent_inspected: VecDeque<f64>,
    curve: Vec<CurvePoint>,
    next_eval: u64,
    next_checkpoint: u64,
    pool: Option<Arc<rayon::ThreadPool>>,
    checkpoint_path: Option<PathBuf>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, episode: EpisodeConfig, cw: CwParams) -> Result<Self, PolicyError> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM));
        let params = PolicyParams::for_inspection(&cfg.hidden, cfg.init_log_std, &mut init_rng);
        let learner = PpoLearner::new(params, cfg.learning_rate, derive_seed(cfg.seed, LEARNER_STREAM));
        let workers = (0..cfg.num_envs)
            .map(|i| RolloutWorker::new(i, cfg.seed, &episode, &cw))
            .collect::<Result<Vec<_>, _>>()?;
        let pool = build_pool(cfg.workers);
        Ok(Self {
            next_checkpoint: cfg.checkpoint_interval,
            cfg,
            episode,
            cw,
            learner,
            curriculum: DvCurriculum::default(),
            workers,
            timesteps: 0,
            iterations: 0,
            recent_inspected: VecDeque::new(),
            curve: Vec::new(),
            next_eval: 0,
            pool,
            checkpoint_path: None,
        })
    }

    /// Rebuilds a trainer from a checkpoint so that training continues
    /// exactly as if it had never stopped.
    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, PolicyError> {
        let Checkpoint {
            train, episode, dynamics, trainer: st, ..
        } = ckpt;
        train.validate()?;
        if st.workers.len() != train.num_envs {
            return Err(PolicyError::InvalidConfig {
                key: "train.num_envs",
                reason: format!("checkpoint holds {} workers, config asks for {}", st.workers.len(), train.num_envs),
            });
        }
        let workers = st
            .workers
            .into_iter()
            .map(|ws| {
                let mut w = RolloutWorker::new(ws.index, train.seed, &episode, &dynamics)?;
                w.env.restore(ws.env);
                w.rng = ws.rng;
                w.episodes = ws.episodes;
                Ok(w)
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        Ok(Self {
            pool: build_pool(train.workers),
            cfg: train,
            episode,
            cw: dynamics,
            learner: st.learner,
            curriculum: st.curriculum,
            workers,
            timesteps: st.timesteps,
            iterations: st.iterations,
            recent_inspected: st.recent_inspected,
            curve: st.curve,
            next_eval: st.next_eval,
            next_checkpoint: st.next_checkpoint,
            checkpoint_path: None,
        })
    }

    /// Writes periodic checkpoints to `path`, overwriting the previous one.
    pub fn set_checkpoint_path(&mut self, path: Option<PathBuf>) {
        self.checkpoint_path = path;
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.learner.params
    }

    pub fn timesteps(&self) -> u64 {
        self.timesteps
    }

    pub fn dv_weight(&self) -> f64 {
        self.curriculum.weight
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            learner: self.learner.clone(),
            curriculum: self.curriculum,
            timesteps: self.timesteps,
            iterations: self.iterations,
            recent_inspected: self.recent_inspected.clone(),
            curve: self.curve.clone(),
            next_eval: self.next_eval,
            next_checkpoint: self.next_checkpoint,
            workers: self.workers.iter().map(RolloutWorker::state).collect(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.cfg.clone(), self.episode.clone(), self.cw, self.state())
    }

    /// Evaluates the deterministic policy at the evaluation ΔV weight.
    pub fn evaluate(&self, episodes: usize) -> Result<Vec<EpisodeMetrics>, PolicyError> {
        let settings = EvalSettings {
            trials: episodes,
            master_seed: derive_seed(self.cfg.seed, EVAL_STREAM),
            bootstrap_resamples: 1,
            workers: self.cfg.workers,
        };
        let params = &self.learner.params;
        let rows = run_evaluation(&[0], |_, _| PolicyController { params }, &self.episode, &self.cw, &settings)?;
        Ok(rows.iter().map(|r| r.metrics()).collect())
    }

    fn record_curve_point(&mut self) -> Result<(), PolicyError> {
        let eps = self.evaluate(self.cfg.eval_episodes)?;
        self.curve.push(CurvePoint::from_episodes(self.timesteps, self.curriculum.weight, &eps));
        Ok(())
    }

    fn maybe_evaluate(&mut self) -> Result<(), PolicyError> {
        if self.cfg.eval_interval == 0 || self.cfg.eval_episodes == 0 {
            return Ok(());
        }
        if self.timesteps >= self.next_eval {
            self.record_curve_point()?;
            while self.next_eval <= self.timesteps {
                self.next_eval += self.cfg.eval_interval;
            }
        }
        Ok(())
    }

    fn maybe_checkpoint(&mut self) -> Result<(), PolicyError> {
        if self.cfg.checkpoint_interval == 0 || self.timesteps < self.next_checkpoint {
            return Ok(());
        }
        while self.next_checkpoint <= self.timesteps {
            self.next_checkpoint += self.cfg.checkpoint_interval;
        }
        if let Some(path) = &self.checkpoint_path {
            self.checkpoint().save(path)?;
        }
        Ok(())
    }

    /// Steps each environment contributes to one rollout.
    fn worker_steps(&self) -> Vec<usize> {
        let n = self.cfg.num_envs;
        let base = self.cfg.rollout_steps / n;
        let extra = self.cfg.rollout_steps % n;
        (0..n).map(|i| base + usize::from(i < extra)).collect()
    }

    /// One rollout of `rollout_steps` transitions followed by a PPO update.
    pub fn iterate(&mut self) -> Result<IterationReport, PolicyError> {
        self.maybe_evaluate()?;
        let steps = self.worker_steps();
        let params = &self.learner.params;
        let w = self.curriculum.weight;
        let cfg = &self.cfg;
        let segments: Vec<Segment> = if cfg.workers == 1 {
            self.workers
                .iter_mut()
                .zip(&steps)
                .map(|(wk, &s)| wk.collect(params, s, w, cfg))
                .collect::<Result<_, _>>()?
        } else {
            let run = |workers: &mut Vec<RolloutWorker>| {
                workers
                    .par_iter_mut()
                    .zip(steps.par_iter())
                    .map(|(wk, &s)| wk.collect(params, s, w, cfg))
                    .collect::<Result<Vec<_>, _>>()
            };
            match &self.pool {
                Some(pool) => pool.install(|| run(&mut self.workers))?,
                None => run(&mut self.workers)?,
            }
        };

        let mut batch = RolloutBatch::default();
        let mut finished = 0;
        for seg in segments {
            finished += seg.finished.len();
            for pct in seg.finished {
                if self.recent_inspected.len() == CURRICULUM_EPISODES {
                    self.recent_inspected.pop_front();
                }
                self.recent_inspected.push_back(pct);
            }
            batch.extend(seg.batch);
        }
        let collected = batch.len();
        let stats = self.learner.update(&batch, &self.cfg)?;
        self.timesteps += collected as u64;
        self.iterations += 1;

        let mean = (!self.recent_inspected.is_empty())
            .then(|| self.recent_inspected.iter().sum::<f64>() / self.recent_inspected.len() as f64);
        if let Some(m) = mean {
            self.curriculum.advance(m, collected);
        }
        self.maybe_checkpoint()?;
        Ok(IterationReport {
            timesteps: self.timesteps,
            episodes_finished: finished,
            mean_inspected_pct: mean,
            dv_weight: self.curriculum.weight,
            stats,
        })
    }

    /// Trains until at least `total` timesteps have been collected, calling
    /// `on_iteration` after every update. A final evaluation point is
    /// recorded at the last timestep.
    pub fn run_until<F>(&mut self, total: u64, mut on_iteration: F) -> Result<(), PolicyError>
    where
        F: FnMut(&IterationReport),
    {
        while self.timesteps < total {
            let report = self.iterate()?;
            on_iteration(&report);
        }
        let evals_on = self.cfg.eval_interval > 0 && self.cfg.eval_episodes > 0;
        if evals_on && self.curve.last().is_none_or(|p| p.timestep != self.timesteps) {
            self.record_curve_point()?;
            while self.next_eval <= self.timesteps {
                self.next_eval += self.cfg.eval_interval;
            }
        }
        Ok(())
    }
}

fn build_pool(workers: usize) -> Option<Arc<rayon::ThreadPool>> {
    if workers <= 1 {
        return None;
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok().map(Arc::new)
}

/// Trains a fresh policy for `cfg.total_timesteps` steps.
pub fn train(cfg: &TrainConfig, episode: &EpisodeConfig, cw: &CwParams) -> Result<(PolicyParams, Vec<CurvePoint>), PolicyError> {
    let mut trainer = Trainer::new(cfg.clone(), episode.clone(), *cw)?;
    trainer.run_until(cfg.total_timesteps, |_| {})?;
    Ok((trainer.learner.params, trainer.curve))
}

/// Writes a training curve as CSV.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> std::io::Result<()> {
    let mut out = String::from(CurvePoint::CSV_HEADER);
    out.push('\n');
    for p in curve {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Parses a curve written by [`write_curve_csv`].
pub fn read_curve_csv(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == CurvePoint::CSV_HEADER => {}
        other => return Err(format!("unexpected curve header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("row {}: expected 6 columns, found {}", i + 1, f.len()));
            }
            let num = |k: usize| f[k].trim().parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1));
            Ok(CurvePoint {
                timestep: f[0].trim().parse().map_err(|e| format!("row {}: {e}", i + 1))?,
                dv_weight: num(1)?,
                inspected_pct: num(2)?,
                delta_v: num(3)?,
                episode_length: num(4)?,
                total_reward: num(5)?,
            })
        })
        .collect()
}
