//! Client for the embedding service.
//!
//! `POST /embed` takes `{"modality", "is_goal", "payload"}` and answers
//! `{"embedding", "dim", "model"}`; `GET /info` lists the served modalities.

use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::obs::FrameImage;

use super::{
    BackendDescriptor, BackendKind, Embedder, EmbeddingError, EmbeddingVector, GoalSpec, Modality, ObservationRef,
};

/// Environment variable holding the service base URL.
pub const ENDPOINT_ENV: &str = "LORD_EMBED_ENDPOINT";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8765".into(),
            timeout: Duration::from_secs(10),
            max_retries: 3,
            backoff: Duration::from_millis(50),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Payload {
    Text(String),
    Image(FrameImage),
    Video(Vec<FrameImage>),
}

impl Payload {
    pub fn modality(&self) -> Modality {
        match self {
            Payload::Text(_) => Modality::Text,
            Payload::Image(_) => Modality::Image,
            Payload::Video(_) => Modality::Video,
        }
    }

    fn to_json(&self) -> Result<serde_json::Value, EmbeddingError> {
        let encode = |f: &FrameImage| {
            f.to_png_bytes()
                .map(|png| base64::engine::general_purpose::STANDARD.encode(png))
                .map_err(|e| EmbeddingError::Input(format!("png encoding failed: {e}")))
        };
        Ok(match self {
            Payload::Text(t) => serde_json::Value::String(t.clone()),
            Payload::Image(f) => serde_json::Value::String(encode(f)?),
            Payload::Video(frames) => {
                serde_json::Value::Array(frames.iter().map(encode).collect::<Result<Vec<_>, _>>()?.into_iter().map(serde_json::Value::String).collect())
            }
        })
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    modality: &'a str,
    is_goal: bool,
    payload: serde_json::Value,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
    dim: usize,
    model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityInfo {
    pub modality: String,
    pub dim: usize,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceInfo {
    pub modalities: Vec<ModalityInfo>,
}

/// Blocking HTTP client with retry on transient failures.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    agent: ureq::Agent,
    config: RemoteConfig,
}

enum Attempt<T> {
    Done(T),
    Retry(EmbeddingError),
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, config }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut() -> Attempt<T>) -> Result<T, EmbeddingError> {
        let mut tries = 0;
        loop {
            match attempt() {
                Attempt::Done(v) => return Ok(v),
                Attempt::Retry(err) if tries >= self.config.max_retries => return Err(err),
                Attempt::Retry(_) => {
                    std::thread::sleep(self.config.backoff * 2u32.saturating_pow(tries));
                    tries += 1;
                }
            }
        }
    }

    fn classify(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Attempt<Result<String, EmbeddingError>> {
        match result {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string();
                match (status, body) {
                    (200..=299, Ok(body)) => Attempt::Done(Ok(body)),
                    (200..=299, Err(e)) => Attempt::Done(Err(EmbeddingError::Protocol(format!("unreadable body: {e}")))),
                    (500..=599, body) => Attempt::Retry(EmbeddingError::Availability(format!(
                        "service error {status}: {}",
                        body.unwrap_or_default()
                    ))),
                    (_, body) => Attempt::Done(Err(EmbeddingError::Protocol(format!(
                        "request rejected with {status}: {}",
                        body.unwrap_or_default()
                    )))),
                }
            }
            Err(e) => Attempt::Retry(EmbeddingError::Availability(e.to_string())),
        }
    }

    pub fn info(&self) -> Result<ServiceInfo, EmbeddingError> {
        let body = self.with_retries(|| Self::classify(self.agent.get(&self.url("/info")).call()))??;
        let info: ServiceInfo =
            serde_json::from_str(&body).map_err(|e| EmbeddingError::Protocol(format!("malformed /info: {e}")))?;
        for m in &info.modalities {
            Modality::parse(&m.modality)?;
            if m.dim == 0 {
                return Err(EmbeddingError::Protocol(format!("modality {} advertises dim 0", m.modality)));
            }
        }
        Ok(info)
    }

    /// One `/embed` round trip; returns the vector and the model name.
    pub fn embed(
        &self,
        modality: Modality,
        is_goal: bool,
        payload: &Payload,
    ) -> Result<(EmbeddingVector, String), EmbeddingError> {
        if !is_goal && payload.modality() != modality {
            return Err(EmbeddingError::Input(format!("{} payload for {modality} request", payload.modality())));
        }
        if is_goal && !matches!(payload, Payload::Text(_)) {
            return Err(EmbeddingError::Input("goals are sent as text".into()));
        }
        let request = EmbedRequest { modality: modality.as_str(), is_goal, payload: payload.to_json()? };
        let body = self.with_retries(|| Self::classify(self.agent.post(&self.url("/embed")).send_json(&request)))??;
        let resp: EmbedResponse =
            serde_json::from_str(&body).map_err(|e| EmbeddingError::Protocol(format!("malformed /embed response: {e}")))?;
        if resp.embedding.len() != resp.dim {
            return Err(EmbeddingError::Protocol(format!(
                "response dim {} but {} values",
                resp.dim,
                resp.embedding.len()
            )));
        }
        let v = EmbeddingVector::new(resp.embedding).map_err(|e| EmbeddingError::Protocol(e.to_string()))?;
        Ok((v, resp.model))
    }

    /// Embeds every payload; results are in request order.
    pub fn embed_batch(
        &self,
        modality: Modality,
        is_goal: bool,
        payloads: &[Payload],
    ) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        payloads.iter().map(|p| self.embed(modality, is_goal, p).map(|(v, _)| v)).collect()
    }
}

/// [`Embedder`] backed by the service for a single modality.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: RemoteClient,
    descriptor: BackendDescriptor,
}

impl RemoteEmbedder {
    /// Queries `/info` to learn the modality's dim and model name.
    pub fn connect(client: RemoteClient, modality: Modality) -> Result<Self, EmbeddingError> {
        let info = client.info()?;
        let entry = info
            .modalities
            .iter()
            .find(|m| m.modality == modality.as_str())
            .ok_or_else(|| EmbeddingError::Interface(format!("service does not serve {modality}")))?;
        let descriptor =
            BackendDescriptor { name: entry.model.clone(), modality, dim: entry.dim, kind: BackendKind::Remote };
        Ok(Self { client, descriptor })
    }

    fn checked(&self, v: EmbeddingVector) -> Result<EmbeddingVector, EmbeddingError> {
        if v.dim() != self.descriptor.dim {
            return Err(EmbeddingError::Interface(format!(
                "service returned dim {} for {}, advertised {}",
                v.dim(),
                self.descriptor.modality,
                self.descriptor.dim
            )));
        }
        Ok(v)
    }
}

impl Embedder for RemoteEmbedder {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn embed_observation(&self, obs: ObservationRef<'_>) -> Result<EmbeddingVector, EmbeddingError> {
        let payload = match obs {
            ObservationRef::Text(t) => Payload::Text(t.to_owned()),
            ObservationRef::Image(f) => Payload::Image(f.clone()),
            ObservationRef::Video(c) => Payload::Video(c.frames().iter().map(|f| (**f).clone()).collect()),
        };
        let (v, _) = self.client.embed(self.descriptor.modality, false, &payload)?;
        self.checked(v)
    }

    fn embed_goal_unchecked(&self, goal: &GoalSpec) -> Result<EmbeddingVector, EmbeddingError> {
        let (v, _) = self.client.embed(goal.modality, true, &Payload::Text(goal.goal_text.clone()))?;
        self.checked(v)
    }
}
