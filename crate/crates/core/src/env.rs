//! The episodic inspection task.
//!
//! An episode spawns the deputy 50-100 m from the chief with a random Sun
//! angle and runs until the horizon, a crash, an escape, or until every
//! surface point has been inspected. Each step the action is saturated, the
//! deputy and Sun are propagated, and the points that are in view and
//! illuminated at the new state are marked inspected.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, CwParams, CwPropagator, DeputyState, SunState};
use crate::error::EnvError;
use crate::geometry::{
    self, cluster_uninspected, generate_sphere_points, InspectionPointSet, DEFAULT_CHIEF_RADIUS,
    DEFAULT_POINT_COUNT,
};
use crate::illumination::IlluminationModel;

/// Reward per newly inspected point.
pub const POINT_REWARD: f64 = 0.1;
/// Penalty paid once when the deputy enters the crash radius.
pub const CRASH_PENALTY: f64 = -1.0;
/// Number of observation components.
pub const OBS_DIM: usize = 11;
/// Number of action components.
pub const ACT_DIM: usize = 3;

/// Closed interval used for spawn sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            self.min + (self.max - self.min) * rng.random::<f64>()
        } else {
            self.min
        }
    }
}

/// Fixed observation scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationScale {
    /// Positions are divided by this (m).
    pub position: f64,
    /// Velocities are divided by this (m/s).
    pub velocity: f64,
}

impl Default for ObservationScale {
    fn default() -> Self {
        Self {
            position: 100.0,
            velocity: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub spawn_radius: Interval,
    pub spawn_speed: Interval,
    /// Chief radius plus the safety buffer (m).
    pub crash_radius: f64,
    pub escape_radius: f64,
    pub chief_radius: f64,
    /// Requested number of surface points; the generated set may differ.
    pub point_count: usize,
    pub illumination: IlluminationModel,
    pub observation_scale: ObservationScale,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 1224,
            spawn_radius: Interval::new(50.0, 100.0),
            spawn_speed: Interval::new(0.0, 0.3),
            crash_radius: DEFAULT_CHIEF_RADIUS + 5.0,
            escape_radius: 800.0,
            chief_radius: DEFAULT_CHIEF_RADIUS,
            point_count: DEFAULT_POINT_COUNT,
            illumination: IlluminationModel::default(),
            observation_scale: ObservationScale::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |key: &'static str, reason: String| Err(EnvError::InvalidConfig { key, reason });
        if self.max_steps == 0 {
            return bad("episode.max_steps", "must be at least 1".into());
        }
        if self.point_count == 0 {
            return bad("episode.point_count", "must be at least 1".into());
        }
        if !(self.chief_radius > 0.0) {
            return bad("episode.chief_radius", format!("{} is not positive", self.chief_radius));
        }
        if !(self.spawn_radius.min > 0.0 && self.spawn_radius.min <= self.spawn_radius.max) {
            return bad(
                "episode.spawn_radius",
                format!("invalid interval [{}, {}]", self.spawn_radius.min, self.spawn_radius.max),
            );
        }
        if !(self.spawn_speed.min >= 0.0 && self.spawn_speed.min <= self.spawn_speed.max) {
            return bad(
                "episode.spawn_speed",
                format!("invalid interval [{}, {}]", self.spawn_speed.min, self.spawn_speed.max),
            );
        }
        if !(self.crash_radius >= self.chief_radius) {
            return bad(
                "episode.crash_radius",
                format!("{} is inside the chief radius {}", self.crash_radius, self.chief_radius),
            );
        }
        if !(self.crash_radius < self.spawn_radius.min) {
            return bad(
                "episode.crash_radius",
                format!("{} must be below the minimum spawn radius {}", self.crash_radius, self.spawn_radius.min),
            );
        }
        if !(self.escape_radius > self.spawn_radius.max) {
            return bad(
                "episode.escape_radius",
                format!("{} must exceed the maximum spawn radius {}", self.escape_radius, self.spawn_radius.max),
            );
        }
        let w = &self.illumination.window;
        if !(0.0..=1.0).contains(&w.dark) || !(0.0..=1.0).contains(&w.bright) || w.dark > w.bright {
            return bad("illumination.window", format!("invalid window [{}, {}]", w.dark, w.bright));
        }
        if !(self.observation_scale.position > 0.0 && self.observation_scale.velocity > 0.0) {
            return bad("episode.observation_scale", "scales must be positive".into());
        }
        Ok(())
    }
}

/// The 11-element policy input: scaled position, scaled velocity, Sun angle
/// over 2π, inspected fraction, and the direction to the largest
/// uninspected cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn cluster_direction(&self) -> Vector3<f64> {
        Vector3::new(self.0[8], self.0[9], self.0[10])
    }
}

/// Thrust command in newtons, one component per axis.
pub type ActionVec = ControlInput;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub points: f64,
    pub delta_v: f64,
    pub crash: f64,
    pub total: f64,
    /// ΔV weight in force for this step.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    #[default]
    Running,
    Horizon,
    Crash,
    Escape,
    Complete,
}

impl Termination {
    pub fn is_done(self) -> bool {
        self != Self::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Running => "running",
            Self::Horizon => "horizon",
            Self::Crash => "crash",
            Self::Escape => "escape",
            Self::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub reason: Termination,
    pub newly_inspected: Vec<usize>,
    /// ΔV spent this step (m/s).
    pub delta_v: f64,
    /// Action after saturation.
    pub applied: ActionVec,
}

/// ΔV spent by holding `action` for `dt` seconds.
pub fn delta_v(action: &ActionVec, params: &CwParams) -> f64 {
    action.l1_norm() / params.mass * params.dt
}

/// Per-step reward terms.
pub fn compute_reward(
    new_points: usize,
    action: &ActionVec,
    pos: &Vector3<f64>,
    weight: f64,
    params: &CwParams,
    crash_radius: f64,
) -> RewardBreakdown {
    let points = POINT_REWARD * new_points as f64;
    let delta_v = -weight * delta_v(action, params);
    let crash = if pos.norm() < crash_radius { CRASH_PENALTY } else { 0.0 };
    RewardBreakdown {
        points,
        delta_v,
        crash,
        total: points + delta_v + crash,
        weight,
    }
}

/// Curriculum for the ΔV penalty weight.
///
/// The weight rises by [`DvCurriculum::STEP`] for every 1500 environment
/// steps during which the mean training inspection percentage stays above
/// 90 %, and falls by the same amount for every 1500 steps spent below 80 %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvCurriculum {
    pub weight: f64,
    pub steps_above: usize,
    pub steps_below: usize,
}

impl Default for DvCurriculum {
    fn default() -> Self {
        Self {
            weight: Self::MIN,
            steps_above: 0,
            steps_below: 0,
        }
    }
}

impl DvCurriculum {
    pub const MIN: f64 = 0.001;
    pub const MAX: f64 = 0.1;
    pub const STEP: f64 = 0.00005;
    pub const WINDOW: usize = 1500;
    pub const RAISE_ABOVE_PCT: f64 = 90.0;
    pub const LOWER_BELOW_PCT: f64 = 80.0;
    /// Weight used for evaluation episodes.
    pub const EVAL: f64 = 0.1;

    pub fn new(weight: f64) -> Self {
        Self {
            weight: weight.clamp(Self::MIN, Self::MAX),
            ..Self::default()
        }
    }

    /// Accounts for `env_steps` steps at the given rolling mean inspection
    /// percentage and returns the updated weight.
    pub fn advance(&mut self, mean_inspected_pct: f64, env_steps: usize) -> f64 {
        if mean_inspected_pct > Self::RAISE_ABOVE_PCT {
            self.steps_below = 0;
            self.steps_above += env_steps;
            while self.steps_above >= Self::WINDOW {
                self.steps_above -= Self::WINDOW;
                self.weight += Self::STEP;
            }
        } else if mean_inspected_pct < Self::LOWER_BELOW_PCT {
            self.steps_above = 0;
            self.steps_below += env_steps;
            while self.steps_below >= Self::WINDOW {
                self.steps_below -= Self::WINDOW;
                self.weight -= Self::STEP;
            }
        } else {
            self.steps_above = 0;
            self.steps_below = 0;
        }
        self.weight = self.weight.clamp(Self::MIN, Self::MAX);
        self.weight
    }
}

/// Single-step form of [`DvCurriculum::advance`].
pub fn update_dv_weight(current_w: f64, mean_inspected_pct: f64, steps_above: &mut usize) -> f64 {
    let mut c = DvCurriculum {
        weight: current_w,
        steps_above: *steps_above,
        steps_below: 0,
    };
    let w = c.advance(mean_inspected_pct, 1);
    *steps_above = c.steps_above;
    w
}

/// Everything that changes during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub deputy: DeputyState,
    pub sun: SunState,
    pub points: InspectionPointSet,
    pub step: usize,
    pub seed: u64,
    pub reason: Termination,
    pub cluster_direction: Vector3<f64>,
    pub total_delta_v: f64,
    pub total_reward: f64,
}

impl EnvironmentState {
    pub fn inspected_pct(&self) -> f64 {
        100.0 * self.points.inspected_count() as f64 / self.points.len() as f64
    }
}

/// Aggregate outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub inspected_pct: f64,
    pub delta_v: f64,
    /// Episode duration (s).
    pub episode_length: f64,
    pub total_reward: f64,
}

/// Inspection environment bound to one dynamics model and config.
#[derive(Debug, Clone)]
pub struct InspectionEnv {
    config: EpisodeConfig,
    propagator: CwPropagator,
    template: InspectionPointSet,
    dv_weight: f64,
    state: EnvironmentState,
}

impl InspectionEnv {
    pub fn new(config: EpisodeConfig, params: CwParams) -> Result<Self, EnvError> {
        config.validate()?;
        let propagator = CwPropagator::new(params)?;
        let template = generate_sphere_points(config.point_count, config.chief_radius)?;
        let state = EnvironmentState {
            deputy: DeputyState::default(),
            sun: SunState::default(),
            points: template.clone(),
            step: 0,
            seed: 0,
            reason: Termination::Horizon,
            cluster_direction: Vector3::zeros(),
            total_delta_v: 0.0,
            total_reward: 0.0,
        };
        Ok(Self {
            config,
            propagator,
            template,
            dv_weight: DvCurriculum::MIN,
            state,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn params(&self) -> &CwParams {
        self.propagator.params()
    }

    pub fn state(&self) -> &EnvironmentState {
        &self.state
    }

    pub fn point_count(&self) -> usize {
        self.template.len()
    }

    pub fn dv_weight(&self) -> f64 {
        self.dv_weight
    }

    pub fn set_dv_weight(&mut self, w: f64) {
        self.dv_weight = w;
    }

    pub fn is_done(&self) -> bool {
        self.state.reason.is_done()
    }

    /// Restores a previously captured state (checkpoint resume).
    pub fn restore(&mut self, state: EnvironmentState) {
        self.state = state;
    }

    /// Starts a new episode with randomized initial conditions.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let position = spherical(&mut rng) * self.config.spawn_radius.sample(&mut rng);
        let velocity = spherical(&mut rng) * self.config.spawn_speed.sample(&mut rng);
        let sun = SunState::new(TAU * rng.random::<f64>());
        self.reset_to(seed, DeputyState::new(position, velocity), sun)
    }

    /// Starts an episode from explicit initial conditions.
    pub fn reset_to(&mut self, seed: u64, deputy: DeputyState, sun: SunState) -> Observation {
        let mut points = self.template.clone();
        points.reset_flags();
        self.state = EnvironmentState {
            deputy,
            sun,
            points,
            step: 0,
            seed,
            reason: Termination::Running,
            cluster_direction: Vector3::zeros(),
            total_delta_v: 0.0,
            total_reward: 0.0,
        };
        self.refresh_cluster();
        self.observation()
    }

    fn refresh_cluster(&mut self) {
        let seed = splitmix64(self.state.seed ^ (self.state.step as u64).wrapping_mul(0x9E37_79B9));
        self.state.cluster_direction = cluster_uninspected(&self.state.points, seed).direction;
    }

    pub fn observation(&self) -> Observation {
        build_observation(&self.state, &self.config.observation_scale)
    }

    pub fn step(&mut self, action: ActionVec) -> Result<StepResult, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        let params = *self.propagator.params();
        let applied = action.saturate(params.u_max);
        self.state.deputy = self.propagator.propagate(&self.state.deputy, applied)?;
        self.state.sun = self.state.sun.propagate(&params);
        self.state.step += 1;

        let newly_inspected = self.inspect();
        let pos = self.state.deputy.position;
        let reward = compute_reward(
            newly_inspected.len(),
            &applied,
            &pos,
            self.dv_weight,
            &params,
            self.config.crash_radius,
        );
        let dv = delta_v(&applied, &params);
        self.state.total_delta_v += dv;
        self.state.total_reward += reward.total;

        let dist = pos.norm();
        let reason = if dist < self.config.crash_radius {
            Termination::Crash
        } else if dist > self.config.escape_radius {
            Termination::Escape
        } else if self.state.points.all_inspected() {
            Termination::Complete
        } else if self.state.step >= self.config.max_steps {
            Termination::Horizon
        } else {
            Termination::Running
        };
        self.state.reason = reason;
        self.refresh_cluster();

        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: reason.is_done(),
            reason,
            newly_inspected,
            delta_v: dv,
            applied,
        })
    }

    fn inspect(&mut self) -> Vec<usize> {
        let agent = self.state.deputy.position;
        let radius = self.state.points.radius();
        let Ok(visible) = geometry::visible_points(&agent, &self.state.points) else {
            return Vec::new();
        };
        let sun_dir = self.state.sun.unit_vector();
        let model = self.config.illumination;
        let mut fresh = Vec::new();
        for idx in visible {
            if self.state.points.is_inspected(idx) {
                continue;
            }
            let p = self.state.points.points()[idx];
            if model.classify(&p, &agent, &sun_dir, radius).inspectable {
                self.state.points.mark_inspected(idx);
                fresh.push(idx);
            }
        }
        fresh
    }

    /// Metrics of the current (normally finished) episode.
    pub fn metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics {
            inspected_pct: self.state.inspected_pct(),
            delta_v: self.state.total_delta_v,
            episode_length: self.state.step as f64 * self.params().dt,
            total_reward: self.state.total_reward,
        }
    }
}

/// Assembles the scaled observation vector from an environment state.
pub fn build_observation(state: &EnvironmentState, scale: &ObservationScale) -> Observation {
    let p = state.deputy.position / scale.position;
    let v = state.deputy.velocity / scale.velocity;
    let inspected = state.points.inspected_count() as f64 / state.points.len() as f64;
    let c = state.cluster_direction;
    Observation([
        p.x,
        p.y,
        p.z,
        v.x,
        v.y,
        v.z,
        state.sun.theta() / TAU,
        inspected,
        c.x,
        c.y,
        c.z,
    ])
}

/// Unit vector from azimuth in [0, 2π) and elevation in [-π/2, π/2], each
/// drawn uniformly.
fn spherical(rng: &mut impl Rng) -> Vector3<f64> {
    let azimuth = TAU * rng.random::<f64>();
    let elevation = -FRAC_PI_2 + PI * rng.random::<f64>();
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    Vector3::new(ce * ca, ce * sa, se)
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives the seed of item `index` in a stream rooted at `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// One line of the trajectory log. Field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub theta_s: f64,
    pub new_points: usize,
    pub cum_points: usize,
    pub r_points: f64,
    pub r_dv: f64,
    pub r_crash: f64,
    pub total_reward: f64,
    pub done: bool,
    pub reason: Termination,
}

impl TrajectoryRecord {
    /// Record describing the state reached after `result`.
    pub fn from_step(env: &InspectionEnv, result: &StepResult) -> Self {
        let s = env.state();
        let (p, v) = (s.deputy.position, s.deputy.velocity);
        Self {
            step: s.step,
            t: s.step as f64 * env.params().dt,
            x: p.x,
            y: p.y,
            z: p.z,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            fx: result.applied.fx,
            fy: result.applied.fy,
            fz: result.applied.fz,
            theta_s: s.sun.theta(),
            new_points: result.newly_inspected.len(),
            cum_points: s.points.inspected_count(),
            r_points: result.reward.points,
            r_dv: result.reward.delta_v,
            r_crash: result.reward.crash,
            total_reward: result.reward.total,
            done: result.done,
            reason: result.reason,
        }
    }
}

/// Writes records as JSON lines.
pub fn write_trajectory<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory(text: &str) -> Result<Vec<TrajectoryRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Anything that maps observations to thrust commands.
pub trait Controller {
    fn act(&mut self, obs: &Observation, env: &InspectionEnv) -> ActionVec;
}

/// Runs one episode from `seed` to termination, returning its metrics and
/// the per-step log.
pub fn run_episode<C: Controller + ?Sized>(
    env: &mut InspectionEnv,
    controller: &mut C,
    seed: u64,
) -> Result<(EpisodeMetrics, Vec<TrajectoryRecord>), EnvError> {
    let mut obs = env.reset(seed);
    let mut log = Vec::with_capacity(env.config().max_steps);
    loop {
        let action = controller.act(&obs, env);
        let result = env.step(action)?;
        log.push(TrajectoryRecord::from_step(env, &result));
        obs = result.observation;
        if result.done {
            break;
        }
    }
    Ok((env.metrics(), log))
}
