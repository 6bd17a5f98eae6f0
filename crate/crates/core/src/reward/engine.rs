use std::collections::HashMap;
use std::sync::Arc;

use super::{composite_reward, constant_reward, grad_reward, lord_reward, speed_reward, target_reward, RewardSpec};
use crate::embedding::{
    embed_goal, Embedder, EmbeddingError, EmbeddingVector, Modality, ObservationRef, Polarity, ReferenceEmbedder,
};
use crate::obs::{compute_ttc, describe_text, render_frame, FrameBuffer, DEFAULT_TTC_THRESHOLD};
use crate::sim::{StepOutcome, WorldState};

const TEXT_CACHE_LIMIT: usize = 4096;

enum Node {
    Embed { embedder: Arc<dyn Embedder>, goal: EmbeddingVector, polarity: Polarity },
    Grad,
    Constant,
    Speed,
    Composite(Vec<(f64, Node)>),
}

/// Evaluates a [`RewardSpec`] on simulator states over one episode at a time.
///
/// Holds the frame history needed by video rewards, so call
/// [`RewardEngine::reset`] at every episode start and
/// [`RewardEngine::observe_substep`] after every simulation substep.
pub struct RewardEngine {
    spec: RewardSpec,
    root: Node,
    needs_frames: bool,
    frames: FrameBuffer,
    text_cache: HashMap<String, EmbeddingVector>,
}

impl RewardEngine {
    /// `backend` supplies the embedder for each modality the spec mentions.
    pub fn new(
        spec: RewardSpec,
        mut backend: impl FnMut(Modality) -> Result<Arc<dyn Embedder>, EmbeddingError>,
    ) -> Result<Self, EmbeddingError> {
        spec.validate().map_err(EmbeddingError::Input)?;
        let mut embedders: HashMap<Modality, Arc<dyn Embedder>> = HashMap::new();
        for m in spec.modalities() {
            embedders.insert(m, backend(m)?);
        }
        let root = compile(&spec, &embedders)?;
        let needs_frames = spec.modalities().contains(&Modality::Video);
        Ok(Self { spec, root, needs_frames, frames: FrameBuffer::new(), text_cache: HashMap::new() })
    }

    pub fn reference(spec: RewardSpec) -> Result<Self, EmbeddingError> {
        Self::new(spec, |m| Ok(Arc::new(ReferenceEmbedder::new(m)) as Arc<dyn Embedder>))
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    pub fn needs_frames(&self) -> bool {
        self.needs_frames
    }

    pub fn reset(&mut self, world: &WorldState) {
        self.frames.clear();
        if self.needs_frames {
            self.frames.push(render_frame(world));
        }
    }

    pub fn observe_substep(&mut self, world: &WorldState) {
        if self.needs_frames {
            self.frames.push(render_frame(world));
        }
    }

    /// Reward for the policy step that produced `world` and `outcome`.
    pub fn reward(&mut self, world: &WorldState, outcome: &StepOutcome) -> Result<f64, EmbeddingError> {
        let mut obs = LazyObs { world, frames: &mut self.frames, text: None, image: None, cache: &mut self.text_cache };
        evaluate(&self.root, &mut obs, outcome)
    }
}

fn compile(spec: &RewardSpec, embedders: &HashMap<Modality, Arc<dyn Embedder>>) -> Result<Node, EmbeddingError> {
    Ok(match spec {
        RewardSpec::LordOpposite { .. } | RewardSpec::TargetGoal { .. } => {
            let goal_spec = spec.goal().expect("embedding reward has a goal");
            let embedder = embedders[&goal_spec.modality].clone();
            let goal = embed_goal(embedder.as_ref(), &goal_spec)?;
            Node::Embed { embedder, goal, polarity: goal_spec.polarity }
        }
        RewardSpec::Grad => Node::Grad,
        RewardSpec::Constant => Node::Constant,
        RewardSpec::Speed => Node::Speed,
        RewardSpec::Composite { components } => Node::Composite(
            components.iter().map(|c| Ok((c.weight, compile(&c.spec, embedders)?))).collect::<Result<_, _>>()?,
        ),
    })
}

// Observations are built on first use and shared across composite components.
struct LazyObs<'a> {
    world: &'a WorldState,
    frames: &'a mut FrameBuffer,
    text: Option<String>,
    image: Option<crate::obs::FrameImage>,
    cache: &'a mut HashMap<String, EmbeddingVector>,
}

impl LazyObs<'_> {
    fn embed(&mut self, embedder: &dyn Embedder) -> Result<EmbeddingVector, EmbeddingError> {
        match embedder.descriptor().modality {
            Modality::Text => {
                let text = self
                    .text
                    .get_or_insert_with(|| describe_text(&compute_ttc(self.world), DEFAULT_TTC_THRESHOLD).0)
                    .clone();
                if let Some(v) = self.cache.get(&text) {
                    return Ok(v.clone());
                }
                let v = embedder.embed_observation(ObservationRef::Text(&text))?;
                if self.cache.len() >= TEXT_CACHE_LIMIT {
                    self.cache.clear();
                }
                self.cache.insert(text, v.clone());
                Ok(v)
            }
            Modality::Image => {
                let frame = self.image.get_or_insert_with(|| render_frame(self.world));
                embedder.embed_observation(ObservationRef::Image(frame))
            }
            Modality::Video => {
                if self.frames.is_empty() {
                    self.frames.push(render_frame(self.world));
                }
                let clip = self.frames.clip().expect("non-empty buffer");
                embedder.embed_observation(ObservationRef::Video(&clip))
            }
        }
    }
}

fn evaluate(node: &Node, obs: &mut LazyObs<'_>, outcome: &StepOutcome) -> Result<f64, EmbeddingError> {
    Ok(match node {
        Node::Embed { embedder, goal, polarity } => {
            let e = obs.embed(embedder.as_ref())?;
            match polarity {
                Polarity::Opposite => lord_reward(&e, goal)?,
                Polarity::Target => target_reward(&e, goal)?,
            }
        }
        Node::Grad => grad_reward(outcome.ego_speed, outcome.collided),
        Node::Constant => constant_reward(outcome.collided),
        Node::Speed => speed_reward(outcome.ego_speed),
        Node::Composite(parts) => {
            let mut values = Vec::with_capacity(parts.len());
            for (w, p) in parts {
                values.push((evaluate(p, obs, outcome)?, *w));
            }
            composite_reward(&values)
        }
    })
}
