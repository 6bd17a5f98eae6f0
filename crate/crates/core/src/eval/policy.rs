use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::obs::KinematicsObs;
use crate::ppo::{policy_forward, sample_action, PolicyParams, PpoError};
use crate::sim::{MetaAction, WorldState};

/// Something that picks a meta-action each policy step.
///
/// Implementations are stateless; per-episode randomness comes from `rng`.
pub trait DrivingPolicy: Sync {
    fn name(&self) -> String;

    fn act(&self, world: &WorldState, state: &KinematicsObs, rng: &mut ChaCha8Rng) -> Result<MetaAction, PpoError>;
}

/// A trained network; actions are sampled from its distribution.
pub struct PpoPolicy {
    pub params: PolicyParams,
    pub label: String,
}

impl PpoPolicy {
    pub fn new(params: PolicyParams, label: impl Into<String>) -> Self {
        Self { params, label: label.into() }
    }
}

impl DrivingPolicy for PpoPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&self, _world: &WorldState, state: &KinematicsObs, rng: &mut ChaCha8Rng) -> Result<MetaAction, PpoError> {
        let (probs, _) = policy_forward(&self.params, state)?;
        Ok(sample_action(&probs, rng).0)
    }
}

/// Uniform over the five meta-actions.
pub struct RandomPolicy;

impl DrivingPolicy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, _: &WorldState, _: &KinematicsObs, rng: &mut ChaCha8Rng) -> Result<MetaAction, PpoError> {
        Ok(MetaAction::ALL[rng.random_range(0..MetaAction::COUNT)])
    }
}

pub struct FixedPolicy(pub MetaAction);

impl DrivingPolicy for FixedPolicy {
    fn name(&self) -> String {
        format!("always-{}", self.0.name())
    }

    fn act(&self, _: &WorldState, _: &KinematicsObs, _: &mut ChaCha8Rng) -> Result<MetaAction, PpoError> {
        Ok(self.0)
    }
}

/// Plays back a fixed action list, then repeats the last entry.
pub struct ScriptedPolicy(pub Vec<MetaAction>);

impl DrivingPolicy for ScriptedPolicy {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&self, world: &WorldState, _: &KinematicsObs, _: &mut ChaCha8Rng) -> Result<MetaAction, PpoError> {
        Ok(self.0.get(world.step_index).or(self.0.last()).copied().unwrap_or(MetaAction::Idle))
    }
}
