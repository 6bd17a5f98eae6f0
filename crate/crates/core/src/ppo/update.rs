use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::net::{Adam, MlpGrad};
use super::policy::PolicyParams;
use super::{PpoConfig, PpoError};

/// Loss weights used by [`loss_and_grad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_epsilon: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl From<&PpoConfig> for LossCoefs {
    fn from(c: &PpoConfig) -> Self {
        Self { clip_epsilon: c.clip_epsilon, entropy_coef: c.entropy_coef, value_coef: c.value_coef }
    }
}

/// Training data for one update, with advantages already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateBatch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl UpdateBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn select(&self, idx: &[usize]) -> UpdateBatch {
        UpdateBatch {
            states: self.states.select(Axis(0), idx),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            old_log_probs: idx.iter().map(|&i| self.old_log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    /// Negated mean clipped surrogate.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub actor: MlpGrad,
    pub critic: MlpGrad,
}

impl PolicyGrad {
    pub fn norm(&self) -> f64 {
        (self.actor.sq_norm() + self.critic.sq_norm()).sqrt()
    }
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to the logits, where
/// `ratio = probs[action] / old_prob`.
pub fn surrogate_logit_grad(probs: &[f64], action: usize, ratio: f64, advantage: f64, epsilon: f64) -> Vec<f64> {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    if ratio * advantage > clipped * advantage {
        return vec![0.0; probs.len()];
    }
    probs
        .iter()
        .enumerate()
        .map(|(j, p)| advantage * ratio * (if j == action { 1.0 } else { 0.0 } - p))
        .collect()
}

/// PPO loss over `batch` and its gradient with respect to both networks.
pub fn loss_and_grad(params: &PolicyParams, batch: &UpdateBatch, coefs: LossCoefs) -> (LossTerms, PolicyGrad) {
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let states: ArrayView2<'_, f64> = batch.states.view();
    let (logits, actor_cache) = params.actor.forward_cached(states);
    let (values, critic_cache) = params.critic.forward_cached(states);
    let k = logits.ncols();

    let mut terms = LossTerms::default();
    let mut d_logits = Array2::zeros((n, k));
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let log_p: Vec<f64> = row.iter().map(|l| l - lse).collect();
        let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let log_ratio = log_p[a] - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let entropy: f64 = -p.iter().zip(&log_p).map(|(p, l)| p * l).sum::<f64>();

        terms.policy_loss -= clipped_surrogate(ratio, adv, coefs.clip_epsilon) * inv_n;
        terms.entropy += entropy * inv_n;
        if (ratio - 1.0).abs() > coefs.clip_epsilon {
            terms.clip_fraction += inv_n;
        }
        terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

        let g = surrogate_logit_grad(&p, a, ratio, adv, coefs.clip_epsilon);
        for j in 0..k {
            // d(-H)/dlogit_j = p_j (ln p_j + H)
            d_logits[[i, j]] = -g[j] * inv_n + coefs.entropy_coef * p[j] * (log_p[j] + entropy) * inv_n;
        }
    }

    let mut d_values = Array2::zeros((n, 1));
    for i in 0..n {
        let err = values[[i, 0]] - batch.returns[i];
        terms.value_loss += err * err * inv_n;
        d_values[[i, 0]] = 2.0 * coefs.value_coef * err * inv_n;
    }
    terms.total = terms.policy_loss + coefs.value_coef * terms.value_loss - coefs.entropy_coef * terms.entropy;

    let grad = PolicyGrad {
        actor: params.actor.backward(&actor_cache, d_logits),
        critic: params.critic.backward(&critic_cache, d_values),
    };
    (terms, grad)
}

pub struct PolicyOptimizer {
    actor: Adam,
    critic: Adam,
}

impl PolicyOptimizer {
    pub fn new(params: &PolicyParams, learning_rate: f64) -> Self {
        Self { actor: Adam::new(&params.actor, learning_rate), critic: Adam::new(&params.critic, learning_rate) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Runs `epochs_per_update` shuffled minibatch passes over `batch`.
///
/// On a non-finite loss or gradient the parameters and optimizer are left
/// exactly as they were before the call.
pub fn ppo_update(
    params: &mut PolicyParams,
    optimizer: &mut PolicyOptimizer,
    batch: &UpdateBatch,
    config: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats, PpoError> {
    if batch.is_empty() {
        return Err(PpoError::Input("empty update batch".into()));
    }
    let coefs = LossCoefs::from(config);
    let mut work_params = params.clone();
    let mut work_actor = optimizer.actor.clone();
    let mut work_critic = optimizer.critic.clone();
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..config.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mb = batch.select(chunk);
            let (terms, mut grad) = loss_and_grad(&work_params, &mb, coefs);
            let norm = grad.norm();
            if !terms.total.is_finite() || !norm.is_finite() {
                return Err(PpoError::Numerical(format!(
                    "non-finite loss {} (gradient norm {norm}) after {} minibatches",
                    terms.total, stats.minibatches
                )));
            }
            if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
                let k = config.max_grad_norm / norm;
                grad.actor.scale(k);
                grad.critic.scale(k);
            }
            work_actor.step(&mut work_params.actor, &grad.actor);
            work_critic.step(&mut work_params.critic, &grad.critic);
            stats.policy_loss += terms.policy_loss;
            stats.value_loss += terms.value_loss;
            stats.entropy += terms.entropy;
            stats.total_loss += terms.total;
            stats.clip_fraction += terms.clip_fraction;
            stats.approx_kl += terms.approx_kl;
            stats.minibatches += 1;
        }
    }
    if !work_params.is_finite() {
        return Err(PpoError::Numerical("parameters became non-finite".into()));
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.total_loss /= m;
    stats.clip_fraction /= m;
    stats.approx_kl /= m;
    *params = work_params;
    optimizer.actor = work_actor;
    optimizer.critic = work_critic;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_ratio_surrogate_is_advantage() {
        let adv = [0.3, -1.2, 2.5, 0.0];
        let mean: f64 = adv.iter().map(|&a| clipped_surrogate(1.0, a, 0.2)).sum::<f64>() / 4.0;
        assert_eq!(mean, adv.iter().sum::<f64>() / 4.0);
    }

    #[test]
    fn clipped_branch_has_zero_gradient() {
        let g = surrogate_logit_grad(&[0.5, 0.3, 0.2], 0, 1.4, 1.0, 0.2);
        assert_eq!(g, vec![0.0; 3]);
        let g = surrogate_logit_grad(&[0.5, 0.3, 0.2], 0, 1.4, -1.0, 0.2);
        assert!(g.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn update_with_nan_advantage_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = PolicyParams::new(4, &[5], 3, 1);
        let before = params.clone();
        let mut opt = PolicyOptimizer::new(&params, 1e-3);
        let batch = UpdateBatch {
            states: Array2::from_shape_fn((4, 4), |(i, j)| (i + j) as f64 * 0.1),
            actions: vec![0, 1, 2, 0],
            old_log_probs: vec![-1.1; 4],
            advantages: vec![1.0, f64::NAN, 0.0, -1.0],
            returns: vec![0.0; 4],
        };
        let config = PpoConfig { minibatch_size: 4, epochs_per_update: 2, ..PpoConfig::default() };
        assert!(matches!(ppo_update(&mut params, &mut opt, &batch, &config, &mut rng), Err(PpoError::Numerical(_))));
        assert_eq!(params, before);
    }
}
