//! PPO training of the meta-action policy from kinematics states.

mod checkpoint;
mod config;
mod net;
mod policy;
mod rollout;
mod train;
mod update;

pub use checkpoint::{checkpoint_load, checkpoint_load_expecting, checkpoint_save, decode, encode, FORMAT_VERSION, MAGIC};
pub use config::PpoConfig;
pub use net::{Adam, Linear, Mlp, MlpGrad};
pub use policy::{policy_forward, sample_action, sample_index, softmax, PolicyParams};
pub use rollout::{compute_gae, normalize_advantages, RolloutBuffer, Transition};
pub use train::{train, MetricsRow, TrainOutput, Worker, METRICS_HEADER};
pub use update::{
    clipped_surrogate, loss_and_grad, ppo_update, surrogate_logit_grad, LossCoefs, LossTerms, PolicyGrad,
    PolicyOptimizer, UpdateBatch, UpdateStats,
};

use crate::embedding::EmbeddingError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("persistence error: {0}")]
    Persistence(String),
    #[error("environment error: {0}")]
    Env(#[from] SimError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl PpoError {
    pub fn kind(&self) -> &'static str {
        match self {
            PpoError::Input(_) => "input",
            PpoError::Numerical(_) => "numerical",
            PpoError::Persistence(_) => "persistence",
            PpoError::Env(_) => "environment",
            PpoError::Embedding(EmbeddingError::Availability(_)) => "availability",
            PpoError::Embedding(_) => "embedding",
        }
    }
}
