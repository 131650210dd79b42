//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::actor_critic::PolicyParams;
use super::mlp::Mlp;
use super::ppo::TrainConfig;
use super::train::TrainerState;
use crate::dynamics::CwParams;
use crate::env::EpisodeConfig;
use crate::error::CheckpointError;

pub const CHECKPOINT_FORMAT: &str = "inspect-ppo-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub timesteps: u64,
    pub dv_weight: f64,
    pub train: TrainConfig,
    pub episode: EpisodeConfig,
    pub dynamics: CwParams,
    pub trainer: TrainerState,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

impl Checkpoint {
    pub fn new(train: TrainConfig, episode: EpisodeConfig, dynamics: CwParams, trainer: TrainerState) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            timesteps: trainer.timesteps,
            dv_weight: trainer.curriculum.weight,
            train,
            episode,
            dynamics,
            trainer,
        }
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.trainer.learner.params
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses and validates a checkpoint. The format tag and version are
    /// checked before anything else so old files fail with a clear message.
    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let header: Header = serde_json::from_str(text)?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: header.format,
                version: header.version,
                expected: CHECKPOINT_FORMAT,
                expected_version: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Self = serde_json::from_str(text)?;
        validate_policy(ckpt.policy())?;
        Ok(ckpt)
    }

    /// Writes through a temporary file so an interrupted save never leaves a
    /// truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_mlp(name: &str, mlp: &Mlp) -> Result<(), CheckpointError> {
    let expected = Mlp::param_count_for(mlp.sizes());
    if mlp.sizes().len() < 2 || mlp.params().len() != expected {
        return Err(CheckpointError::Shape {
            name: format!("{name}.params"),
            found: vec![mlp.params().len()],
            expected: vec![expected],
        });
    }
    Ok(())
}

/// Checks that the stored tensors fit together.
pub fn validate_policy(p: &PolicyParams) -> Result<(), CheckpointError> {
    check_mlp("actor", &p.actor)?;
    check_mlp("critic", &p.critic)?;
    if p.log_std.len() != p.actor.output_dim() {
        return Err(CheckpointError::Shape {
            name: "log_std".into(),
            found: vec![p.log_std.len()],
            expected: vec![p.actor.output_dim()],
        });
    }
    if p.critic.output_dim() != 1 || p.critic.input_dim() != p.actor.input_dim() {
        return Err(CheckpointError::Shape {
            name: "critic".into(),
            found: vec![p.critic.input_dim(), p.critic.output_dim()],
            expected: vec![p.actor.input_dim(), 1],
        });
    }
    Ok(())
}
