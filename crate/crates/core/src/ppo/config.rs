use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    /// Transitions gathered per update, summed over all workers.
    pub rollout_length: usize,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Global gradient norm cap; 0 disables clipping.
    pub max_grad_norm: f64,
    pub total_env_steps: usize,
    pub hidden_sizes: Vec<usize>,
    pub num_workers: usize,
    /// Write a checkpoint every this many updates (the final one is always written).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            rollout_length: 2048,
            epochs_per_update: 10,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            total_env_steps: 200_000,
            hidden_sizes: vec![256, 256],
            num_workers: 4,
            checkpoint_every: 10,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_epsilon", self.clip_epsilon),
            ("learning_rate", self.learning_rate),
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("max_grad_norm", self.max_grad_norm),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("ppo.{name} must be finite"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("ppo.gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(format!("ppo.gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if self.clip_epsilon <= 0.0 {
            return Err("ppo.clip_epsilon must be positive".into());
        }
        if self.learning_rate <= 0.0 {
            return Err("ppo.learning_rate must be positive".into());
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 || self.max_grad_norm < 0.0 {
            return Err("ppo coefficients must be non-negative".into());
        }
        for (name, v) in [
            ("rollout_length", self.rollout_length),
            ("epochs_per_update", self.epochs_per_update),
            ("minibatch_size", self.minibatch_size),
            ("total_env_steps", self.total_env_steps),
            ("num_workers", self.num_workers),
            ("checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return Err(format!("ppo.{name} must be at least 1"));
            }
        }
        if self.num_workers > self.rollout_length {
            return Err("ppo.num_workers cannot exceed ppo.rollout_length".into());
        }
        if self.hidden_sizes.contains(&0) {
            return Err("ppo.hidden_sizes entries must be positive".into());
        }
        Ok(())
    }
}
