use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::checkpoint_save;
use super::policy::{policy_forward, sample_action, PolicyParams};
use super::rollout::{normalize_advantages, RolloutBuffer, Transition};
use super::update::{ppo_update, PolicyOptimizer, UpdateBatch, UpdateStats};
use super::{PpoConfig, PpoError};
use crate::embedding::BackendConfig;
use crate::obs::{build_kinematics, KinematicsObs, FEATURES};
use crate::reward::{RewardEngine, RewardSpec};
use crate::sim::{reset, step_observed, EnvConfig, WorldState};

pub const METRICS_HEADER: &str =
    "step,update,mean_reward,mean_episode_return,mean_episode_len,episodes,policy_loss,value_loss,entropy,clip_fraction,approx_kl";

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub step: usize,
    pub update: usize,
    /// Mean per-step reward over the rollout.
    pub mean_reward: f64,
    /// Over episodes that finished during the rollout; `None` if none did.
    pub mean_episode_return: Option<f64>,
    pub mean_episode_len: Option<f64>,
    pub episodes: usize,
    pub stats: UpdateStats,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.update,
            self.mean_reward,
            opt(self.mean_episode_return),
            opt(self.mean_episode_len),
            self.episodes,
            self.stats.policy_loss,
            self.stats.value_loss,
            self.stats.entropy,
            self.stats.clip_fraction,
            self.stats.approx_kl
        )
    }
}

#[derive(Debug)]
pub struct TrainOutput {
    pub params: PolicyParams,
    pub metrics: Vec<MetricsRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// One environment instance with its own reward engine and random stream.
pub struct Worker {
    config: EnvConfig,
    world: WorldState,
    engine: RewardEngine,
    env_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    state: KinematicsObs,
    episode_return: f64,
    episode_len: usize,
}

impl Worker {
    /// Reset seeds come from `env_seed`, action sampling from `policy_seed`.
    pub fn new(config: EnvConfig, engine: RewardEngine, env_seed: u64, policy_seed: u64) -> Result<Self, PpoError> {
        let mut env_rng = ChaCha8Rng::seed_from_u64(env_seed);
        let world = reset(&config, env_rng.random())?;
        let mut worker = Self {
            state: build_kinematics(&world),
            config,
            world,
            engine,
            env_rng,
            policy_rng: ChaCha8Rng::seed_from_u64(policy_seed),
            episode_return: 0.0,
            episode_len: 0,
        };
        worker.engine.reset(&worker.world);
        Ok(worker)
    }

    /// Collects `n` transitions, returning finished episodes as `(return, length)`.
    pub fn collect(
        &mut self,
        params: &PolicyParams,
        n: usize,
    ) -> Result<(RolloutBuffer, Vec<(f64, usize)>), PpoError> {
        let mut buffer = RolloutBuffer::default();
        let mut finished = vec![];
        for _ in 0..n {
            let (probs, value) = policy_forward(params, &self.state)?;
            let (action, log_prob) = sample_action(&probs, &mut self.policy_rng);
            let engine = &mut self.engine;
            let outcome = if engine.needs_frames() {
                step_observed(&mut self.world, action, |w| engine.observe_substep(w))?
            } else {
                step_observed(&mut self.world, action, |_| {})?
            };
            let reward = self.engine.reward(&self.world, &outcome)?;
            if !reward.is_finite() {
                return Err(PpoError::Numerical(format!("non-finite reward {reward}")));
            }
            let done = outcome.done();
            buffer.transitions.push(Transition {
                state: std::mem::replace(&mut self.state, build_kinematics(&self.world)),
                action,
                log_prob,
                reward,
                value,
                done,
            });
            self.episode_return += reward;
            self.episode_len += 1;
            if done {
                finished.push((self.episode_return, self.episode_len));
                self.episode_return = 0.0;
                self.episode_len = 0;
                self.world = reset(&self.config, self.env_rng.random())?;
                self.engine.reset(&self.world);
                self.state = build_kinematics(&self.world);
            }
        }
        buffer.bootstrap_value = policy_forward(params, &self.state)?.1;
        Ok((buffer, finished))
    }
}

fn worker_share(total: usize, workers: usize, i: usize) -> usize {
    total / workers + usize::from(i < total % workers)
}

fn persist_error(run_dir: &Path, step: usize, err: &PpoError) {
    let record = serde_json::json!({ "kind": err.kind(), "message": err.to_string(), "step": step });
    let _ = std::fs::write(run_dir.join("error.json"), serde_json::to_string_pretty(&record).unwrap());
}

/// Trains a fresh policy, writing `metrics.csv` and checkpoints under `run_dir`.
///
/// If training fails, an `error.json` record is left in `run_dir`.
pub fn train(
    env: &EnvConfig,
    reward: &RewardSpec,
    ppo: &PpoConfig,
    backend: &BackendConfig,
    run_dir: &Path,
    mut progress: impl FnMut(&MetricsRow),
) -> Result<TrainOutput, PpoError> {
    let mut step = 0;
    let result = train_inner(env, reward, ppo, backend, run_dir, &mut step, &mut progress);
    if let Err(e) = &result {
        persist_error(run_dir, step, e);
    }
    result
}

fn train_inner(
    env: &EnvConfig,
    reward: &RewardSpec,
    ppo: &PpoConfig,
    backend: &BackendConfig,
    run_dir: &Path,
    step: &mut usize,
    progress: &mut dyn FnMut(&MetricsRow),
) -> Result<TrainOutput, PpoError> {
    env.validate()?;
    ppo.validate().map_err(PpoError::Input)?;
    let ckpt_dir = run_dir.join("checkpoints");
    let io = |e: std::io::Error| PpoError::Persistence(e.to_string());
    std::fs::create_dir_all(&ckpt_dir).map_err(io)?;

    let input_dim = env.observed_vehicles * FEATURES;
    let mut params = PolicyParams::driving(input_dim, &ppo.hidden_sizes, ppo.seed);
    let mut optimizer = PolicyOptimizer::new(&params, ppo.learning_rate);
    let mut update_rng = ChaCha8Rng::seed_from_u64(ppo.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut workers = (0..ppo.num_workers)
        .map(|i| {
            let engine = RewardEngine::new(reward.clone(), |m| backend.build(m))?;
            let stream = |base: u64| base.wrapping_mul(1_000_003).wrapping_add(i as u64 + 1);
            Worker::new(env.clone(), engine, stream(env.seed), stream(ppo.seed))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut metrics_file = std::fs::File::create(run_dir.join("metrics.csv")).map_err(io)?;
    writeln!(metrics_file, "{METRICS_HEADER}").map_err(io)?;
    let mut out = TrainOutput { params: params.clone(), metrics: vec![], checkpoints: vec![] };
    let mut update = 0;
    while *step < ppo.total_env_steps {
        let n = ppo.rollout_length.min(ppo.total_env_steps - *step);
        let nworkers = workers.len().min(n);
        let snapshot = &params;
        let results = workers[..nworkers]
            .par_iter_mut()
            .enumerate()
            .map(|(i, w)| w.collect(snapshot, worker_share(n, nworkers, i)))
            .collect::<Result<Vec<_>, _>>()?;

        let mut states = Vec::with_capacity(n * input_dim);
        let mut batch = UpdateBatch {
            states: Array2::zeros((0, input_dim)),
            actions: vec![],
            old_log_probs: vec![],
            advantages: vec![],
            returns: vec![],
        };
        let mut reward_sum = 0.0;
        let mut finished = vec![];
        for (buffer, eps) in results {
            let (adv, ret) = buffer.advantages(ppo.gamma, ppo.gae_lambda);
            for t in &buffer.transitions {
                states.extend_from_slice(t.state.as_slice());
                batch.actions.push(t.action.index());
                batch.old_log_probs.push(t.log_prob);
                reward_sum += t.reward;
            }
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
            finished.extend(eps);
        }
        batch.states = Array2::from_shape_vec((n, input_dim), states).expect("rollout states are rectangular");
        normalize_advantages(&mut batch.advantages);
        let stats = ppo_update(&mut params, &mut optimizer, &batch, ppo, &mut update_rng)?;
        *step += n;
        update += 1;

        let episodes = finished.len();
        let mean = |f: &dyn Fn(&(f64, usize)) -> f64| {
            (episodes > 0).then(|| finished.iter().map(f).sum::<f64>() / episodes as f64)
        };
        let row = MetricsRow {
            step: *step,
            update,
            mean_reward: reward_sum / n as f64,
            mean_episode_return: mean(&|e| e.0),
            mean_episode_len: mean(&|e| e.1 as f64),
            episodes,
            stats,
        };
        writeln!(metrics_file, "{}", row.to_csv()).map_err(io)?;
        metrics_file.flush().map_err(io)?;
        progress(&row);
        out.metrics.push(row);

        let last = *step >= ppo.total_env_steps;
        if update % ppo.checkpoint_every == 0 || last {
            let path = ckpt_dir.join(format!("step_{:09}.ckpt", *step));
            checkpoint_save(&params, &path)?;
            out.checkpoints.push(path);
        }
    }
    let final_path = run_dir.join("final.ckpt");
    checkpoint_save(&params, &final_path)?;
    out.checkpoints.push(final_path);
    out.params = params;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_cover_total() {
        for (total, workers) in [(10, 3), (2048, 4), (5, 5), (7, 1)] {
            let sum: usize = (0..workers).map(|i| worker_share(total, workers, i)).sum();
            assert_eq!(sum, total);
        }
    }
}
