use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DrivingPolicy, EvalError};
use crate::obs::{bumper_gap, build_kinematics};
use crate::reward::RewardEngine;
use crate::sim::{step_observed, EnvConfig, MetaAction, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub ego_x: f64,
    pub ego_speed: f64,
    pub action: MetaAction,
    /// One value per entry of [`EpisodeLog::reward_names`].
    pub rewards: Vec<f64>,
    /// Bumper gap to the nearest same-lane vehicle ahead; infinite when none.
    #[serde(serialize_with = "ser_gap", deserialize_with = "de_gap")]
    pub front_gap: f64,
    /// `v_front - v_ego`; 0 when there is no front vehicle.
    pub speed_diff: f64,
    pub collided: bool,
}

fn ser_gap<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_gap<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub config: EnvConfig,
    pub policy: String,
    pub reward_names: Vec<String>,
    pub initial_ego_x: f64,
    pub steps: Vec<StepRecord>,
    pub terminated: bool,
    pub truncated: bool,
}

impl EpisodeLog {
    pub fn collided(&self) -> bool {
        self.steps.last().is_some_and(|s| s.collided)
    }

    /// Completed every policy step of the episode without a collision.
    pub fn success(&self) -> bool {
        !self.collided() && self.steps.len() >= self.config.duration
    }

    pub fn traveled_distance(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.ego_x - self.initial_ego_x)
    }

    pub fn actions(&self) -> Vec<MetaAction> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.reward_names.iter().position(|n| n == name)
    }
}

/// `(front_gap, speed_diff)` to the nearest same-lane vehicle ahead.
pub fn front_vehicle(world: &WorldState) -> (f64, f64) {
    let ego = world.ego();
    world
        .npcs()
        .iter()
        .filter(|v| v.lane_index == ego.lane_index && v.x >= ego.x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
        .map_or((f64::INFINITY, 0.0), |v| (bumper_gap(v.x - ego.x, world.config.vehicle_length), v.speed - ego.speed))
}

/// Plays one episode from `world`, logging every engine's reward each step.
///
/// `seed` drives the policy's own sampling.
pub fn run_episode(
    mut world: WorldState,
    seed: u64,
    policy: &dyn DrivingPolicy,
    engines: &mut [RewardEngine],
) -> Result<EpisodeLog, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a_0f0f_f0f0);
    for e in engines.iter_mut() {
        e.reset(&world);
    }
    let needs_frames = engines.iter().any(|e| e.needs_frames());
    let mut log = EpisodeLog {
        seed,
        config: world.config.clone(),
        policy: policy.name(),
        reward_names: engines.iter().map(|e| e.name()).collect(),
        initial_ego_x: world.ego().x,
        steps: vec![],
        terminated: false,
        truncated: false,
    };
    while !world.done {
        let state = build_kinematics(&world);
        let action = policy.act(&world, &state, &mut rng)?;
        let outcome = if needs_frames {
            step_observed(&mut world, action, |w| engines.iter_mut().for_each(|e| e.observe_substep(w)))?
        } else {
            step_observed(&mut world, action, |_| {})?
        };
        let rewards = engines.iter_mut().map(|e| e.reward(&world, &outcome)).collect::<Result<Vec<_>, _>>()?;
        let (front_gap, speed_diff) = front_vehicle(&world);
        log.steps.push(StepRecord {
            step: outcome.step_index,
            ego_x: outcome.ego_x,
            ego_speed: outcome.ego_speed,
            action,
            rewards,
            front_gap,
            speed_diff,
            collided: outcome.collided,
        });
        log.terminated = outcome.terminated;
        log.truncated = outcome.truncated;
    }
    Ok(log)
}
