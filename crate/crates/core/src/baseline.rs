//! Scripted reference controllers: zero thrust, uniform random thrust, and a
//! sun-synchronous tracker that circles the lit side of the chief.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CwParams, DeputyState};
use crate::env::{ActionVec, Controller, InspectionEnv, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ZeroThrust,
    Random,
    SunSync,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroThrust => "zero_thrust",
            Self::Random => "random",
            Self::SunSync => "sun_sync",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero_thrust" => Ok(Self::ZeroThrust),
            "random" => Ok(Self::Random),
            "sun_sync" => Ok(Self::SunSync),
            other => Err(format!("unknown baseline `{other}` (expected zero_thrust, random or sun_sync)")),
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub struct ZeroThrust;

impl Controller for ZeroThrust {
    fn act(&mut self, _: &Observation, _: &InspectionEnv) -> ActionVec {
        ActionVec::default()
    }
}

/// Independent uniform thrust on each axis.
pub struct RandomThrust {
    rng: ChaCha8Rng,
}

impl RandomThrust {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomThrust {
    fn act(&mut self, _: &Observation, env: &InspectionEnv) -> ActionVec {
        let u = env.params().u_max;
        let mut c = || self.rng.random_range(-u..=u);
        ActionVec::new(c(), c(), c())
    }
}

/// Tuning of the sun-synchronous tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SunSyncGains {
    /// Orbit radius around the chief (m).
    pub radius: f64,
    /// Peak elevation of the reference out of the sun plane (deg).
    pub elevation_amplitude_deg: f64,
    /// Steps per elevation oscillation.
    pub elevation_period_steps: f64,
    /// Azimuth offset ahead of the sun direction (deg).
    pub azimuth_lead_deg: f64,
    /// Steps spent sliding from the spawn direction onto the reference.
    pub transit_steps: f64,
    /// Closed-loop natural frequency (rad/s).
    pub natural_frequency: f64,
    pub damping: f64,
}

impl Default for SunSyncGains {
    fn default() -> Self {
        Self {
            radius: 60.0,
            elevation_amplitude_deg: 45.0,
            elevation_period_steps: 150.0,
            azimuth_lead_deg: 0.0,
            transit_steps: 100.0,
            natural_frequency: 0.03,
            damping: 1.0,
        }
    }
}

/// PD tracker with relative-motion drift cancellation.
pub struct SunSync {
    gains: SunSyncGains,
    start: Option<(u64, Vector3<f64>, f64)>,
}

impl SunSync {
    pub fn new(gains: SunSyncGains) -> Self {
        Self { gains, start: None }
    }

    /// Unit direction of the steady reference at time `t` (s) given the sun
    /// angle at that time.
    fn steady_direction(&self, t: f64, sun_theta: f64, dt: f64) -> Vector3<f64> {
        let g = &self.gains;
        let az = sun_theta + g.azimuth_lead_deg.to_radians();
        let el = g.elevation_amplitude_deg.to_radians() * (TAU * t / (g.elevation_period_steps * dt)).sin();
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Reference position at time `t`, including the initial transit.
    fn reference(&self, t: f64, theta0: f64, params: &CwParams) -> Vector3<f64> {
        let (_, p0, _) = self.start.expect("initialized");
        let theta = theta0 - params.mean_motion * t;
        let steady = self.steady_direction(t, theta, params.dt);
        let transit = self.gains.transit_steps * params.dt;
        if t >= transit || transit <= 0.0 {
            return steady * self.gains.radius;
        }
        // smoothstep keeps the reference velocity continuous at both ends
        let s = t / transit;
        let s = s * s * (3.0 - 2.0 * s);
        let r0 = p0.norm();
        let dir = slerp(&(p0 / r0), &steady, s);
        dir * (r0 + (self.gains.radius - r0) * s)
    }

    fn command(&mut self, env: &InspectionEnv) -> ActionVec {
        let st = env.state();
        let params = *env.params();
        let key = st.seed;
        if self.start.is_none_or(|(k, _, _)| k != key) || st.step == 0 {
            // theta at t = 0 is recovered from the current angle
            let t_now = st.step as f64 * params.dt;
            let theta0 = st.sun.theta() + params.mean_motion * t_now;
            self.start = Some((key, st.deputy.position, theta0));
        }
        let (_, _, theta0) = self.start.unwrap();
        let t = st.step as f64 * params.dt;
        // track the mid-step reference to offset the zero-order hold
        let tc = t + 0.5 * params.dt;
        let h = 1.0;
        let p = self.reference(tc, theta0, &params);
        let pp = self.reference(tc + h, theta0, &params);
        let pm = self.reference(tc - h, theta0, &params);
        let v_ref = (pp - pm) / (2.0 * h);
        let a_ref = (pp - 2.0 * p + pm) / (h * h);
        let a = tracking_accel(&st.deputy, &p, &v_ref, &a_ref, &self.gains, &params);
        let u = params.u_max;
        ActionVec::new(
            (a.x * params.mass).clamp(-u, u),
            (a.y * params.mass).clamp(-u, u),
            (a.z * params.mass).clamp(-u, u),
        )
    }
}

fn tracking_accel(
    s: &DeputyState,
    p_ref: &Vector3<f64>,
    v_ref: &Vector3<f64>,
    a_ref: &Vector3<f64>,
    g: &SunSyncGains,
    params: &CwParams,
) -> Vector3<f64> {
    let n = params.mean_motion;
    let (x, v) = (&s.position, &s.velocity);
    let drift = Vector3::new(3.0 * n * n * x.x + 2.0 * n * v.y, -2.0 * n * v.x, -n * n * x.z);
    let kp = g.natural_frequency * g.natural_frequency;
    let kd = 2.0 * g.damping * g.natural_frequency;
    a_ref - drift + (p_ref - x) * kp + (v_ref - v) * kd
}

fn slerp(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    let dot = a.dot(b).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-9 {
        return *b;
    }
    // antipodal endpoints: pass over the pole-most perpendicular
    let perp = if (std::f64::consts::PI - omega) < 1e-6 {
        let trial = if a.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        (trial - a * a.dot(&trial)).normalize()
    } else {
        (b - a * dot).normalize()
    };
    let ang = omega * s;
    a * ang.cos() + perp * ang.sin()
}

impl Controller for SunSync {
    fn act(&mut self, _: &Observation, env: &InspectionEnv) -> ActionVec {
        self.command(env)
    }
}

/// Boxed controller for a baseline kind.
pub fn make_baseline(kind: BaselineKind, gains: &SunSyncGains, seed: u64) -> Box<dyn Controller + Send> {
    match kind {
        BaselineKind::ZeroThrust => Box::new(ZeroThrust),
        BaselineKind::Random => Box::new(RandomThrust::new(seed)),
        BaselineKind::SunSync => Box::new(SunSync::new(*gains)),
    }
}

impl Controller for Box<dyn Controller + Send> {
    fn act(&mut self, obs: &Observation, env: &InspectionEnv) -> ActionVec {
        (**self).act(obs, env)
    }
}
