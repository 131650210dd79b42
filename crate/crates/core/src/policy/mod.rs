//! Gaussian actor-critic policy and its PPO trainer.

mod actor_critic;
mod adam;
mod checkpoint;
mod gae;
mod mlp;
mod ppo;
mod train;

pub use actor_critic::{gaussian_log_prob, to_thrust, PolicyOutput, PolicyParams};
pub use adam::Adam;
pub use gae::compute_gae;
pub use mlp::{Mlp, MlpCache};
pub use ppo::{
    ppo_update, surrogate_gradient, surrogate_loss, value_gradient, value_loss, ActorGrad, PpoLearner,
    RolloutBatch, SurrogateStats, TrainConfig, UpdateStats,
};
pub use checkpoint::{validate_policy, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{read_curve_csv, train, write_curve_csv, CurvePoint, IterationReport, Trainer, TrainerState, WorkerState, CURRICULUM_EPISODES};
