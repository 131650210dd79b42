//! Clohessy-Wiltshire relative motion and Sun-angle propagation.
//!
//! The deputy is propagated with the exact discrete-time solution of the
//! linearized CW equations under a zero-order-hold force. The transition
//! matrices are obtained once per [`CwParams`] from the exponential of the
//! augmented system matrix `[[A, B], [0, 0]]·dt`.

use std::f64::consts::TAU;

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;

type Mat6 = SMatrix<f64, 6, 6>;
type Mat6x3 = SMatrix<f64, 6, 3>;
type Vec6 = SVector<f64, 6>;

/// Physical and timing constants of the relative-motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CwParams {
    /// Mean motion of the chief orbit (rad/s).
    pub mean_motion: f64,
    /// Deputy mass (kg).
    pub mass: f64,
    /// Per-axis thrust bound (N).
    pub u_max: f64,
    /// Control timestep (s).
    pub dt: f64,
}

impl Default for CwParams {
    fn default() -> Self {
        Self {
            mean_motion: 0.001027,
            mass: 12.0,
            u_max: 1.0,
            dt: 10.0,
        }
    }
}

impl CwParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let checks = [
            ("mean_motion", self.mean_motion),
            ("mass", self.mass),
            ("u_max", self.u_max),
            ("dt", self.dt),
        ];
        for (key, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParam { key, value });
            }
        }
        Ok(())
    }

    /// Continuous-time system matrix of the CW equations.
    pub fn system_matrix(&self) -> Mat6 {
        let n = self.mean_motion;
        let mut a = Mat6::zeros();
        a[(0, 3)] = 1.0;
        a[(1, 4)] = 1.0;
        a[(2, 5)] = 1.0;
        a[(3, 0)] = 3.0 * n * n;
        a[(3, 4)] = 2.0 * n;
        a[(4, 3)] = -2.0 * n;
        a[(5, 2)] = -n * n;
        a
    }

    /// Continuous-time input matrix (forces to accelerations).
    pub fn input_matrix(&self) -> Mat6x3 {
        let mut b = Mat6x3::zeros();
        b[(3, 0)] = 1.0 / self.mass;
        b[(4, 1)] = 1.0 / self.mass;
        b[(5, 2)] = 1.0 / self.mass;
        b
    }
}

/// Deputy position and velocity in Hill's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeputyState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl DeputyState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    pub fn from_array(s: [f64; 6]) -> Self {
        Self {
            position: Vector3::new(s[0], s[1], s[2]),
            velocity: Vector3::new(s[3], s[4], s[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (p, v) = (self.position, self.velocity);
        [p.x, p.y, p.z, v.x, v.y, v.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    fn to_vec6(self) -> Vec6 {
        Vec6::from_column_slice(&self.to_array())
    }

    fn from_vec6(v: &Vec6) -> Self {
        Self::from_array([v[0], v[1], v[2], v[3], v[4], v[5]])
    }
}

/// Per-axis thruster force (N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

impl ControlInput {
    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self { fx, fy, fz }
    }

    /// Clamps every axis into `[-u_max, u_max]`. NaN components map to zero.
    pub fn saturate(self, u_max: f64) -> Self {
        let clamp = |f: f64| if f.is_nan() { 0.0 } else { f.clamp(-u_max, u_max) };
        Self::new(clamp(self.fx), clamp(self.fy), clamp(self.fz))
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    /// Sum of absolute axis forces, the quantity the ΔV cost is built from.
    pub fn l1_norm(&self) -> f64 {
        self.fx.abs() + self.fy.abs() + self.fz.abs()
    }
}

/// Exact one-step CW propagator with precomputed transition matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwPropagator {
    params: CwParams,
    state_transition: Mat6,
    input_transition: Mat6x3,
}

impl CwPropagator {
    pub fn new(params: CwParams) -> Result<Self, DynamicsError> {
        params.validate()?;
        let mut augmented = SMatrix::<f64, 9, 9>::zeros();
        augmented
            .fixed_view_mut::<6, 6>(0, 0)
            .copy_from(&(params.system_matrix() * params.dt));
        augmented
            .fixed_view_mut::<6, 3>(0, 6)
            .copy_from(&(params.input_matrix() * params.dt));
        let expm = augmented.exp();
        Ok(Self {
            params,
            state_transition: expm.fixed_view::<6, 6>(0, 0).into_owned(),
            input_transition: expm.fixed_view::<6, 3>(0, 6).into_owned(),
        })
    }

    pub fn params(&self) -> &CwParams {
        &self.params
    }

    /// Discrete state-transition matrix over one control step.
    pub fn state_transition(&self) -> &Mat6 {
        &self.state_transition
    }

    /// Discrete zero-order-hold input matrix over one control step.
    pub fn input_transition(&self) -> &Mat6x3 {
        &self.input_transition
    }

    /// Advances the deputy by one control step. The force is saturated to
    /// `u_max` per axis before it is applied.
    pub fn propagate(
        &self,
        state: &DeputyState,
        u: ControlInput,
    ) -> Result<DeputyState, DynamicsError> {
        if !state.is_finite() {
            return Err(DynamicsError::NonFiniteState(state.to_array()));
        }
        let u = u.saturate(self.params.u_max).as_vector();
        let next = self.state_transition * state.to_vec6() + self.input_transition * u;
        Ok(DeputyState::from_vec6(&next))
    }
}

/// One-off propagation. Prefer [`CwPropagator`] in loops.
pub fn propagate_deputy(
    state: &DeputyState,
    u: ControlInput,
    params: &CwParams,
) -> Result<DeputyState, DynamicsError> {
    CwPropagator::new(*params)?.propagate(state, u)
}

/// Sun angle measured from the Hill-frame x axis, kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SunState {
    theta: f64,
}

impl SunState {
    pub fn new(theta: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The Sun rotates at `-n` in Hill's frame.
    pub fn propagate(&self, params: &CwParams) -> Self {
        self.advance(params.mean_motion, params.dt)
    }

    pub fn advance(&self, mean_motion: f64, dt: f64) -> Self {
        Self::new(self.theta - mean_motion * dt)
    }

    /// Unit vector from the chief centre toward the Sun.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector3::new(c, s, 0.0)
    }
}

pub fn propagate_sun(sun: SunState, params: &CwParams) -> SunState {
    sun.propagate(params)
}

pub fn sun_unit_vector(sun: SunState) -> Vector3<f64> {
    sun.unit_vector()
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly 2π
    if w >= TAU {
        0.0
    } else {
        w
    }
}
