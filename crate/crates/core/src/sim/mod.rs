//! Deterministic closed-loop highway simulator.

mod collision;
mod config;
pub mod npc;
mod vehicle;
mod world;

pub use collision::{check_collision, Footprint};
pub use config::EnvConfig;
pub use npc::{idm_acceleration, npc_control, Leader, NpcParams};
pub use vehicle::{LaneChange, MetaAction, VehicleState};
pub use world::{reset, step, step_observed, StepOutcome, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("could not place vehicles without overlap after {retries} retries")]
    Spawn { retries: usize },
    #[error("episode lifecycle: {0}")]
    Lifecycle(String),
}
