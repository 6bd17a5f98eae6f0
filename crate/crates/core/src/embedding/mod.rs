//! Embedding backends for observations and linguistic goals.
//!
//! Reference backends are pure functions with no model weights; the remote
//! backend talks to an embedding service over HTTP.

mod goal;
mod image;
mod remote;
mod text;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::obs::{FrameImage, VideoClip};

pub use self::image::{embed_image_ref, embed_video_ref, IMAGE_DIM, POOL_GRID};
pub use goal::{collision_exemplar, cruising_exemplar, embed_goal, GoalSpec, Polarity};
pub use remote::{Payload, RemoteClient, RemoteConfig, RemoteEmbedder, ServiceInfo, ENDPOINT_ENV};
pub use text::{embed_text_ref, token_counts, tokenize, TEXT_DIM};
pub(crate) use text::fnv1a;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error("embedding service unavailable: {0}")]
    Availability(String),
    #[error("embedding protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Video,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Video => "video",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EmbeddingError> {
        match s {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            "video" => Ok(Modality::Video),
            other => Err(EmbeddingError::Protocol(format!("unknown modality `{other}`"))),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dense embedding with finite entries and non-zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Input("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Input("non-finite embedding entry".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbeddingError::Input("zero-norm embedding".into()));
        }
        Ok(Self(values))
    }

    /// Scales `values` to unit L2 norm.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self, EmbeddingError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EmbeddingError::Input("cannot normalize a zero or non-finite vector".into()));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Reference,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub modality: Modality,
    pub dim: usize,
    pub kind: BackendKind,
}

/// A borrowed observation handed to an embedder.
#[derive(Debug, Clone, Copy)]
pub enum ObservationRef<'a> {
    Text(&'a str),
    Image(&'a FrameImage),
    Video(&'a VideoClip),
}

impl ObservationRef<'_> {
    pub fn modality(&self) -> Modality {
        match self {
            ObservationRef::Text(_) => Modality::Text,
            ObservationRef::Image(_) => Modality::Image,
            ObservationRef::Video(_) => Modality::Video,
        }
    }
}

/// One modality's observation encoder together with its goal encoder.
pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn embed_observation(&self, obs: ObservationRef<'_>) -> Result<EmbeddingVector, EmbeddingError>;

    /// Encode a goal whose modality already matches the descriptor.
    fn embed_goal_unchecked(&self, goal: &GoalSpec) -> Result<EmbeddingVector, EmbeddingError>;
}

/// Deterministic in-process backend for one modality.
#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    descriptor: BackendDescriptor,
}

impl ReferenceEmbedder {
    pub fn new(modality: Modality) -> Self {
        let (name, dim) = match modality {
            Modality::Text => ("reference-text-hashed-ngrams", TEXT_DIM),
            Modality::Image => ("reference-image-pooled-grid", IMAGE_DIM),
            Modality::Video => ("reference-video-mean-pooled-grid", IMAGE_DIM),
        };
        Self { descriptor: BackendDescriptor { name: name.into(), modality, dim, kind: BackendKind::Reference } }
    }
}

impl Embedder for ReferenceEmbedder {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn embed_observation(&self, obs: ObservationRef<'_>) -> Result<EmbeddingVector, EmbeddingError> {
        if obs.modality() != self.descriptor.modality {
            return Err(EmbeddingError::Interface(format!(
                "{} observation given to a {} backend",
                obs.modality(),
                self.descriptor.modality
            )));
        }
        match obs {
            ObservationRef::Text(t) => embed_text_ref(t),
            ObservationRef::Image(f) => embed_image_ref(f),
            ObservationRef::Video(c) => embed_video_ref(c),
        }
    }

    fn embed_goal_unchecked(&self, goal: &GoalSpec) -> Result<EmbeddingVector, EmbeddingError> {
        match goal.modality {
            Modality::Text => embed_text_ref(&goal.goal_text),
            Modality::Image | Modality::Video => {
                let frame = match goal.polarity {
                    Polarity::Opposite => collision_exemplar(),
                    Polarity::Target => cruising_exemplar(),
                };
                embed_image_ref(&frame)
            }
        }
    }
}

/// Backend selection shared by training, evaluation and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Service base URL; falls back to the `LORD_EMBED_ENDPOINT` variable.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    3
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Reference, endpoint: None, timeout_ms: default_timeout_ms(), max_retries: default_retries() }
    }
}

impl BackendConfig {
    pub fn resolved_endpoint(&self) -> Option<String> {
        self.endpoint.clone().or_else(|| std::env::var(ENDPOINT_ENV).ok())
    }

    pub fn build(&self, modality: Modality) -> Result<Arc<dyn Embedder>, EmbeddingError> {
        match self.kind {
            BackendKind::Reference => Ok(Arc::new(ReferenceEmbedder::new(modality))),
            BackendKind::Remote => {
                let endpoint = self.resolved_endpoint().ok_or_else(|| {
                    EmbeddingError::Availability(format!("no endpoint configured (set {ENDPOINT_ENV})"))
                })?;
                let client = RemoteClient::new(RemoteConfig {
                    endpoint,
                    timeout: std::time::Duration::from_millis(self.timeout_ms),
                    max_retries: self.max_retries,
                    ..RemoteConfig::default()
                });
                Ok(Arc::new(RemoteEmbedder::connect(client, modality)?))
            }
        }
    }
}
