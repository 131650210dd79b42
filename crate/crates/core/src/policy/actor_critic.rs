use std::f64::consts::{E, PI};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::env::{ActionVec, Observation, ACT_DIM, OBS_DIM};
use crate::error::PolicyError;

/// Actor and critic weights plus the state-independent log standard
/// deviation of the Gaussian policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
}

impl PolicyParams {
    /// Fresh network: `obs_dim → hidden… → act_dim` actor and
    /// `obs_dim → hidden… → 1` critic.
    pub fn init(
        obs_dim: usize,
        hidden: &[usize],
        act_dim: usize,
        init_log_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = actor_sizes.clone();
        *critic_sizes.last_mut().unwrap() = 1;
        let gain = 2f64.sqrt();
        Self {
            actor: Mlp::orthogonal(&actor_sizes, gain, 0.01, rng),
            log_std: vec![init_log_std; act_dim],
            critic: Mlp::orthogonal(&critic_sizes, gain, 1.0, rng),
        }
    }

    /// Network for the inspection task (11 inputs, 3 thrust outputs).
    pub fn for_inspection(hidden: &[usize], init_log_std: f64, rng: &mut impl Rng) -> Self {
        Self::init(OBS_DIM, hidden, ACT_DIM, init_log_std, rng)
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params().iter().chain(&self.log_std).chain(self.critic.params()).all(|v| v.is_finite())
    }

    pub fn action_mean(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.predict_one(obs)
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.predict_one(obs)[0]
    }

    pub fn values(&self, obs: ArrayView2<'_, f64>) -> Vec<f64> {
        self.critic.predict(obs).into_raw_vec_and_offset().0
    }

    pub fn means(&self, obs: ArrayView2<'_, f64>) -> Array2<f64> {
        self.actor.predict(obs)
    }

    /// Log-density of the raw (pre-clamp) action under the current policy.
    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        gaussian_log_prob(mean, &self.log_std, action)
    }

    /// Differential entropy of the diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 * (2.0 * PI * E).ln()).sum()
    }

    /// Chooses an action for one observation.
    ///
    /// Stochastic mode samples the Gaussian; deterministic mode returns its
    /// mean. Either way the emitted thrust is clamped into `[-1, 1]` and
    /// scaled by `u_max`.
    pub fn act(
        &self,
        obs: &[f64],
        stochastic: bool,
        u_max: f64,
        rng: &mut impl Rng,
    ) -> Result<PolicyOutput, PolicyError> {
        if obs.len() != self.obs_dim() {
            return Err(PolicyError::ObservationShape(obs.len(), self.obs_dim()));
        }
        if !obs.iter().all(|v| v.is_finite()) {
            return Err(PolicyError::NonFiniteObservation);
        }
        let mean = self.action_mean(obs);
        let raw: Vec<f64> = if stochastic {
            mean.iter()
                .zip(&self.log_std)
                .map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal))
                .collect()
        } else {
            mean.clone()
        };
        let log_prob = self.log_prob(&mean, &raw);
        let value = self.value(obs);
        Ok(PolicyOutput {
            action: to_thrust(&raw, u_max),
            raw,
            log_prob,
            value,
        })
    }

    /// Convenience wrapper for environment observations.
    pub fn act_obs(
        &self,
        obs: &Observation,
        stochastic: bool,
        u_max: f64,
        rng: &mut impl Rng,
    ) -> Result<PolicyOutput, PolicyError> {
        self.act(obs.as_slice(), stochastic, u_max, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// Clamped thrust command.
    pub action: ActionVec,
    /// Unclamped sample the log-probability refers to.
    pub raw: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Maps a raw policy output to a thrust command.
pub fn to_thrust(raw: &[f64], u_max: f64) -> ActionVec {
    let c = |i: usize| raw.get(i).copied().unwrap_or(0.0).clamp(-1.0, 1.0) * u_max;
    ActionVec::new(c(0), c(1), c(2))
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, s), x)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_actions_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = PolicyParams::for_inspection(&[256, 256], -0.5, &mut rng);
        let obs = [0.5, -0.2, 0.1, 0.0, 0.3, -0.1, 0.4, 0.2, 0.6, 0.0, 0.8];
        let a = p.act(&obs, false, 1.0, &mut rng).unwrap();
        let b = p.act(&obs, false, 1.0, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn actions_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = PolicyParams::for_inspection(&[16], 2.0, &mut rng);
        p.actor.params_mut().iter_mut().for_each(|w| *w *= 50.0);
        for i in 0..200 {
            let obs: Vec<f64> = (0..OBS_DIM).map(|j| ((i * 7 + j) as f64).sin() * 5.0).collect();
            for stochastic in [true, false] {
                let out = p.act(&obs, stochastic, 1.0, &mut rng).unwrap();
                for f in [out.action.fx, out.action.fy, out.action.fz] {
                    assert!((-1.0..=1.0).contains(&f));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::for_inspection(&[8], 0.0, &mut rng);
        assert!(matches!(p.act(&[0.0; 4], false, 1.0, &mut rng), Err(PolicyError::ObservationShape(4, 11))));
        let mut obs = [0.0; 11];
        obs[3] = f64::NAN;
        assert!(matches!(p.act(&obs, false, 1.0, &mut rng), Err(PolicyError::NonFiniteObservation)));
    }

    #[test]
    fn log_prob_of_standard_normal_at_zero() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert_relative_eq!(lp, -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn layer_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::for_inspection(&[256, 256], 0.0, &mut rng);
        assert_eq!(p.actor.sizes(), &[11, 256, 256, 3]);
        assert_eq!(p.critic.sizes(), &[11, 256, 256, 1]);
        assert_eq!(p.act_dim(), 3);
    }
}
