//! Evaluation protocol: success rate, traveled distance and episode reward
//! over fixed seeds, plus reward-landscape export.

mod episode;
mod landscape;
mod policy;
mod report;

pub use episode::{front_vehicle, run_episode, EpisodeLog, StepRecord};
pub use landscape::{landscape_csv, reward_landscape, speed_diff_quartile_means, summarize, LandscapeRow, LandscapeSummary};
pub use policy::{DrivingPolicy, FixedPolicy, PpoPolicy, RandomPolicy, ScriptedPolicy};
pub use report::{evaluate, format_table, EvalReport, SeedRow, EVAL_SEEDS, EVAL_SETTINGS};

use crate::embedding::EmbeddingError;
use crate::ppo::PpoError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("environment error: {0}")]
    Env(#[from] SimError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Policy(#[from] PpoError),
}
