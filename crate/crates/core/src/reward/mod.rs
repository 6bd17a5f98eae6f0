//! Reward functions: opposite-goal (LORD) and target-goal embedding rewards,
//! the GRAD and constant survival baselines, and weighted composition.

mod engine;
mod spec;

pub use engine::RewardEngine;
pub use spec::{RewardSpec, WeightedReward};

use crate::embedding::{EmbeddingError, EmbeddingVector};

/// Survival bonus shared by the GRAD and constant baselines.
pub const SURVIVAL_REWARD: f64 = 0.2;
/// Speed window (m/s) mapped linearly onto `[0, SPEED_REWARD_MAX]`.
pub const SPEED_REWARD_RANGE: (f64, f64) = (20.0, 40.0);
pub const SPEED_REWARD_MAX: f64 = 0.8;

/// `a·b / (|a| |b|)`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::Input(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::Input("zero-norm embedding".into()));
    }
    let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Distance from the undesired goal: `1 - cos(obs, goal)`, in `[0, 2]`.
pub fn lord_reward(obs: &EmbeddingVector, goal: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    Ok(1.0 - cosine_similarity(obs, goal)?)
}

/// Similarity to a desired goal.
pub fn target_reward(obs: &EmbeddingVector, goal: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    cosine_similarity(obs, goal)
}

/// Linear speed term without the survival constant, in `[0, 0.8]`.
pub fn speed_reward(ego_speed: f64) -> f64 {
    let (lo, hi) = SPEED_REWARD_RANGE;
    SPEED_REWARD_MAX * ((ego_speed - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// GRAD baseline: survival constant plus speed term, zero on a crash.
pub fn grad_reward(ego_speed: f64, crashed: bool) -> f64 {
    if crashed {
        0.0
    } else {
        SURVIVAL_REWARD + speed_reward(ego_speed)
    }
}

pub fn constant_reward(crashed: bool) -> f64 {
    if crashed {
        0.0
    } else {
        SURVIVAL_REWARD
    }
}

/// `Σ weight · value`.
pub fn composite_reward(components: &[(f64, f64)]) -> f64 {
    components.iter().map(|(value, weight)| weight * value).sum()
}
