//! Clipped-surrogate PPO update for the Gaussian actor-critic.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor_critic::PolicyParams;
use super::adam::Adam;
use crate::error::PolicyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Environment steps per rollout, summed over all parallel environments.
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    /// Global gradient-norm cap applied separately to actor and critic.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    pub total_timesteps: u64,
    /// Parallel environments feeding each rollout.
    pub num_envs: usize,
    /// Rollout worker threads; 1 forces strictly sequential collection.
    pub workers: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Timesteps between policy evaluations (0 disables them).
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Timesteps between checkpoints (0 disables them).
    pub checkpoint_interval: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            rollout_steps: 3000,
            minibatch_size: 256,
            entropy_coef: 0.0,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            total_timesteps: 10_000_000,
            num_envs: 4,
            workers: 0,
            hidden: vec![256, 256],
            init_log_std: -0.5,
            eval_interval: 100_000,
            eval_episodes: 10,
            checkpoint_interval: 500_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |key: &'static str, reason: String| Err(PolicyError::InvalidConfig { key, reason });
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("train.gamma", format!("{} is outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("train.gae_lambda", format!("{} is outside [0, 1]", self.gae_lambda));
        }
        if !(self.clip_ratio > 0.0) {
            return bad("train.clip_ratio", format!("{} is not positive", self.clip_ratio));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("train.learning_rate", format!("{} is invalid", self.learning_rate));
        }
        if self.minibatch_size == 0 {
            return bad("train.minibatch_size", "must be positive".into());
        }
        if self.num_envs == 0 {
            return bad("train.num_envs", "must be positive".into());
        }
        if self.rollout_steps < self.num_envs {
            return bad(
                "train.rollout_steps",
                format!("{} is smaller than num_envs {}", self.rollout_steps, self.num_envs),
            );
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("train.hidden", "layer widths must be positive".into());
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0) {
                return bad("train.max_grad_norm", format!("{g} is not positive"));
            }
        }
        if !self.init_log_std.is_finite() {
            return bad("train.init_log_std", "must be finite".into());
        }
        Ok(())
    }
}

/// Aligned per-transition training data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch {
    pub observations: Vec<Vec<f64>>,
    /// Raw (pre-clamp) sampled actions.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn extend(&mut self, other: RolloutBatch) {
        self.observations.extend(other.observations);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.rewards.extend(other.rewards);
        self.values.extend(other.values);
        self.dones.extend(other.dones);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let n = self.len();
        let lens = [
            self.actions.len(),
            self.log_probs.len(),
            self.rewards.len(),
            self.values.len(),
            self.dones.len(),
            self.advantages.len(),
            self.returns.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(PolicyError::MalformedBatch(format!(
                "sequence lengths differ: {n} observations vs {lens:?}"
            )));
        }
        if !self.advantages.iter().chain(&self.returns).all(|v| v.is_finite()) {
            return Err(PolicyError::MalformedBatch("non-finite advantages or returns".into()));
        }
        Ok(())
    }

    fn gather(rows: &[Vec<f64>], idx: &[usize]) -> Array2<f64> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut out = Array2::zeros((idx.len(), cols));
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).assign(&ndarray::ArrayView1::from(&rows[i][..]));
        }
        out
    }
}

/// Gradient of the actor objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorGrad {
    pub actor: Vec<f64>,
    pub log_std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateStats {
    pub loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

fn normalized_advantages(batch: &RolloutBatch, idx: &[usize], normalize: bool) -> Vec<f64> {
    let adv: Vec<f64> = idx.iter().map(|&i| batch.advantages[i]).collect();
    if !normalize || adv.len() < 2 {
        return adv;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Clipped surrogate loss (negated objective, minus the entropy bonus) on
/// the transitions `idx`, with its gradient.
pub fn surrogate_gradient(
    params: &PolicyParams,
    batch: &RolloutBatch,
    idx: &[usize],
    cfg: &TrainConfig,
) -> (SurrogateStats, ActorGrad) {
    let obs = RolloutBatch::gather(&batch.observations, idx);
    let actions = RolloutBatch::gather(&batch.actions, idx);
    let adv = normalized_advantages(batch, idx, cfg.normalize_advantages);
    let (means, cache) = params.actor.forward(obs.view());
    let act_dim = params.act_dim();
    let inv_var: Vec<f64> = params.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let n = idx.len() as f64;
    let (lo, hi) = (1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);

    let mut grad_means = Array2::zeros((idx.len(), act_dim));
    let mut grad_log_std = vec![0.0; act_dim];
    let mut objective = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        let mean = means.row(r);
        let action = actions.row(r);
        let new_lp = super::actor_critic::gaussian_log_prob(
            mean.as_slice().unwrap(),
            &params.log_std,
            action.as_slice().unwrap(),
        );
        let log_ratio = new_lp - batch.log_probs[i];
        let ratio = log_ratio.exp();
        let a = adv[r];
        let unclipped = ratio * a;
        let clipped_term = ratio.clamp(lo, hi) * a;
        objective += unclipped.min(clipped_term);
        if ratio < lo || ratio > hi {
            clipped += 1;
        }
        kl += (ratio - 1.0) - log_ratio;
        // d(-min(..))/d log_prob; zero when the clipped constant is selected
        if unclipped <= clipped_term {
            let coef = -unclipped / n;
            for j in 0..act_dim {
                let diff = action[j] - mean[j];
                grad_means[(r, j)] = coef * diff * inv_var[j];
                grad_log_std[j] += coef * (diff * diff * inv_var[j] - 1.0);
            }
        }
    }
    let entropy = params.entropy();
    for g in &mut grad_log_std {
        *g -= cfg.entropy_coef;
    }
    let mut grad_actor = vec![0.0; params.actor.params().len()];
    params.actor.backward(&cache, grad_means, &mut grad_actor);
    (
        SurrogateStats {
            loss: -objective / n - cfg.entropy_coef * entropy,
            entropy,
            clip_fraction: clipped as f64 / n,
            approx_kl: kl / n,
        },
        ActorGrad {
            actor: grad_actor,
            log_std: grad_log_std,
        },
    )
}

/// Loss only, for finite-difference checks.
pub fn surrogate_loss(params: &PolicyParams, batch: &RolloutBatch, idx: &[usize], cfg: &TrainConfig) -> f64 {
    surrogate_gradient(params, batch, idx, cfg).0.loss
}

/// Half mean squared value error on `idx` and its critic gradient.
pub fn value_gradient(params: &PolicyParams, batch: &RolloutBatch, idx: &[usize]) -> (f64, Vec<f64>) {
    let obs = RolloutBatch::gather(&batch.observations, idx);
    let (pred, cache) = params.critic.forward(obs.view());
    let n = idx.len() as f64;
    let mut grad_out = Array2::zeros((idx.len(), 1));
    let mut loss = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        let err = pred[(r, 0)] - batch.returns[i];
        loss += 0.5 * err * err / n;
        grad_out[(r, 0)] = err / n;
    }
    let mut grad = vec![0.0; params.critic.params().len()];
    params.critic.backward(&cache, grad_out, &mut grad);
    (loss, grad)
}

pub fn value_loss(params: &PolicyParams, batch: &RolloutBatch, idx: &[usize]) -> f64 {
    value_gradient(params, batch, idx).0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

impl std::fmt::Display for UpdateStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "policy_loss={:.6} value_loss={:.6} entropy={:.4} clip_fraction={:.3} approx_kl={:.6}",
            self.policy_loss, self.value_loss, self.entropy, self.clip_fraction, self.approx_kl
        )
    }
}

fn clip_norm(grads: &mut [&mut [f64]], max_norm: Option<f64>) {
    let Some(max_norm) = max_norm else { return };
    let norm = grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-12);
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Parameters together with optimizer and shuffling state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoLearner {
    pub params: PolicyParams,
    actor_opt: Adam,
    log_std_opt: Adam,
    critic_opt: Adam,
    rng: ChaCha8Rng,
}

impl PpoLearner {
    pub fn new(params: PolicyParams, learning_rate: f64, seed: u64) -> Self {
        Self {
            actor_opt: Adam::new(params.actor.params().len(), learning_rate),
            log_std_opt: Adam::new(params.log_std.len(), learning_rate),
            critic_opt: Adam::new(params.critic.params().len(), learning_rate),
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Runs the configured epochs of minibatch updates over `batch`.
    pub fn update(&mut self, batch: &RolloutBatch, cfg: &TrainConfig) -> Result<UpdateStats, PolicyError> {
        batch.validate()?;
        let mut stats = UpdateStats::default();
        if batch.is_empty() {
            return Ok(stats);
        }
        for opt in [&mut self.actor_opt, &mut self.log_std_opt, &mut self.critic_opt] {
            opt.learning_rate = cfg.learning_rate;
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut self.rng);
            for (mb, idx) in order.chunks(cfg.minibatch_size).enumerate() {
                let (s, mut ag) = surrogate_gradient(&self.params, batch, idx, cfg);
                let (vl, mut cg) = value_gradient(&self.params, batch, idx);
                let finite = s.loss.is_finite()
                    && vl.is_finite()
                    && ag.actor.iter().chain(&ag.log_std).chain(&cg).all(|g| g.is_finite());
                if !finite {
                    return Err(PolicyError::NonFiniteLoss {
                        epoch,
                        minibatch: mb,
                        stats: format!(
                            "policy_loss={} value_loss={} entropy={} approx_kl={}",
                            s.loss, vl, s.entropy, s.approx_kl
                        ),
                    });
                }
                clip_norm(&mut [&mut ag.actor, &mut ag.log_std], cfg.max_grad_norm);
                clip_norm(&mut [&mut cg], cfg.max_grad_norm);
                self.actor_opt.update(self.params.actor.params_mut(), &ag.actor);
                self.log_std_opt.update(&mut self.params.log_std, &ag.log_std);
                self.critic_opt.update(self.params.critic.params_mut(), &cg);

                stats.policy_loss += s.loss;
                stats.value_loss += vl;
                stats.entropy += s.entropy;
                stats.clip_fraction += s.clip_fraction;
                stats.approx_kl += s.approx_kl;
                stats.minibatches += 1;
            }
        }
        let k = stats.minibatches.max(1) as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.clip_fraction /= k;
        stats.approx_kl /= k;
        Ok(stats)
    }
}

/// One PPO update from fresh optimizer state.
pub fn ppo_update(
    params: &PolicyParams,
    batch: &RolloutBatch,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, UpdateStats), PolicyError> {
    let mut learner = PpoLearner::new(params.clone(), cfg.learning_rate, cfg.seed);
    let stats = learner.update(batch, cfg)?;
    Ok((learner.params, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_batch(rng: &mut ChaCha8Rng, n: usize, obs_dim: usize) -> RolloutBatch {
        let mut b = RolloutBatch::default();
        for _ in 0..n {
            b.observations.push((0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
            b.actions.push(vec![rng.random_range(-1.0..1.0)]);
            b.log_probs.push(rng.random_range(-1.5..-0.5));
            b.rewards.push(0.0);
            b.values.push(0.0);
            b.dones.push(false);
            b.advantages.push(rng.random_range(-1.0..1.0));
            b.returns.push(rng.random_range(-1.0..1.0));
        }
        b
    }

    #[test]
    fn zero_advantages_leave_actor_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = PolicyParams::init(2, &[8], 1, -0.5, &mut rng);
        let mut batch = toy_batch(&mut rng, 64, 2);
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
        let cfg = TrainConfig {
            minibatch_size: 16,
            ..TrainConfig::default()
        };
        let (next, _) = ppo_update(&params, &batch, &cfg).unwrap();
        let max_change = next
            .actor
            .params()
            .iter()
            .chain(&next.log_std)
            .zip(params.actor.params().iter().chain(&params.log_std))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_change < 1e-6, "{max_change}");
    }

    #[test]
    fn positive_advantage_raises_action_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = PolicyParams::init(3, &[16], 1, -0.5, &mut rng);
        let obs = vec![0.2, -0.4, 0.7];
        let mean = params.action_mean(&obs);
        let action = vec![mean[0] + 0.3];
        let lp = params.log_prob(&mean, &action);
        let batch = RolloutBatch {
            observations: vec![obs.clone()],
            actions: vec![action.clone()],
            log_probs: vec![lp],
            rewards: vec![1.0],
            values: vec![0.0],
            dones: vec![true],
            advantages: vec![1.0],
            returns: vec![1.0],
        };
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let (next, _) = ppo_update(&params, &batch, &cfg).unwrap();
        let after = next.log_prob(&next.action_mean(&obs), &action);
        assert!(after > lp, "{after} <= {lp}");
    }

    #[test]
    fn malformed_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = PolicyParams::init(2, &[4], 1, 0.0, &mut rng);
        let mut batch = toy_batch(&mut rng, 8, 2);
        batch.returns.pop();
        assert!(matches!(
            ppo_update(&params, &batch, &TrainConfig::default()),
            Err(PolicyError::MalformedBatch(_))
        ));
    }

    #[test]
    fn nan_loss_aborts_with_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = PolicyParams::init(2, &[4], 1, 0.0, &mut rng);
        params.critic.params_mut()[0] = f64::NAN;
        let batch = toy_batch(&mut rng, 8, 2);
        let err = ppo_update(&params, &batch, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, PolicyError::NonFiniteLoss { epoch: 0, minibatch: 0, .. }));
        assert!(err.to_string().contains("value_loss=NaN"));
    }

    #[test]
    fn value_regression_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut batch = toy_batch(&mut rng, 256, 2);
        for (o, r) in batch.observations.iter().zip(batch.returns.iter_mut()) {
            *r = 0.5 * o[0] - 0.3 * o[1] * o[1] + 0.1;
        }
        let params = PolicyParams::init(2, &[32, 32], 1, 0.0, &mut rng);
        let mut learner = PpoLearner::new(params, 3e-3, 1);
        let cfg = TrainConfig {
            epochs: 1,
            minibatch_size: 64,
            learning_rate: 3e-3,
            max_grad_norm: None,
            ..TrainConfig::default()
        };
        for _ in 0..400 {
            learner.update(&batch, &cfg).unwrap();
        }
        let all: Vec<usize> = (0..batch.len()).collect();
        let mse = 2.0 * value_loss(&learner.params, &batch, &all);
        assert!(mse < 1e-3, "mse = {mse}");
    }

    #[test]
    fn config_validation_names_key() {
        let cfg = TrainConfig {
            gamma: 1.5,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("train.gamma"));
        assert!(TrainConfig::default().validate().is_ok());
    }
}
