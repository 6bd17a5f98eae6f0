use serde::{Deserialize, Serialize};

use crate::obs::{render_frame, FrameImage};
use crate::sim::{EnvConfig, VehicleState, WorldState};

use super::{Embedder, EmbeddingError, EmbeddingVector, Modality};

pub const TEXT_OPPOSITE_GOAL: &str = "A collision is happening.";
pub const VISUAL_OPPOSITE_GOAL: &str = "White car collides with a blue car.";
pub const TEXT_TARGET_GOAL: &str = "Ego is driving safely.";
pub const VISUAL_TARGET_GOAL: &str = "White car drives safely.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Undesired outcome; reward grows with distance from it.
    Opposite,
    /// Desired outcome; reward grows with similarity to it.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub modality: Modality,
    pub goal_text: String,
    pub polarity: Polarity,
}

impl GoalSpec {
    pub fn default_for(modality: Modality, polarity: Polarity) -> Self {
        let text = match (modality, polarity) {
            (Modality::Text, Polarity::Opposite) => TEXT_OPPOSITE_GOAL,
            (Modality::Text, Polarity::Target) => TEXT_TARGET_GOAL,
            (_, Polarity::Opposite) => VISUAL_OPPOSITE_GOAL,
            (_, Polarity::Target) => VISUAL_TARGET_GOAL,
        };
        Self { modality, goal_text: text.to_owned(), polarity }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.goal_text = text.into();
        self
    }
}

/// Embed a goal with a backend of the same modality.
pub fn embed_goal(backend: &dyn Embedder, goal: &GoalSpec) -> Result<EmbeddingVector, EmbeddingError> {
    let descriptor = backend.descriptor();
    if descriptor.modality != goal.modality {
        return Err(EmbeddingError::Interface(format!(
            "{} goal given to {} backend `{}`",
            goal.modality, descriptor.modality, descriptor.name
        )));
    }
    let embedding = backend.embed_goal_unchecked(goal)?;
    if embedding.dim() != descriptor.dim {
        return Err(EmbeddingError::Interface(format!(
            "backend `{}` returned dim {} but advertises {}",
            descriptor.name,
            embedding.dim(),
            descriptor.dim
        )));
    }
    Ok(embedding)
}

fn exemplar(npc_offset: f64, npc_lane: usize) -> FrameImage {
    let car = |id: u32, lane: usize, x: f64| VehicleState {
        id,
        lane_index: lane,
        target_lane: lane,
        x,
        y: lane as f64 * 4.0,
        speed: 25.0,
        heading: 0.0,
        target_speed: 25.0,
        crashed: false,
        is_ego: id == 0,
    };
    let world = WorldState::from_vehicles(
        EnvConfig::default(),
        vec![car(0, 1, 0.0), car(1, npc_lane, npc_offset)],
        0,
    )
    .expect("exemplar scene is valid");
    render_frame(&world)
}

/// White ego overlapping a blue npc from behind.
pub fn collision_exemplar() -> FrameImage {
    exemplar(3.0, 1)
}

/// White ego with a blue npc well clear in the next lane.
pub fn cruising_exemplar() -> FrameImage {
    exemplar(8.0, 2)
}
