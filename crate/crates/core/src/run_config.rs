//! Single-file run configuration and the manifest written into run directories.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{BackendConfig, BackendDescriptor, BackendKind, Modality};
use crate::ppo::PpoConfig;
use crate::reward::RewardSpec;
use crate::sim::EnvConfig;

#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

/// Episodes logged with the trained policy after training, for analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingConfig {
    /// Number of logged episodes; 0 disables logging.
    pub episodes: usize,
    /// Rewards recorded alongside the training reward and GRAD.
    pub extra_rewards: Vec<RewardSpec>,
    /// Episode length for the logged corpus.
    pub duration: usize,
    pub first_seed: u64,
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self { episodes: 100, extra_rewards: vec![], duration: 30, first_seed: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub env: EnvConfig,
    pub reward: RewardSpec,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub logging: LoggingConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| ConfigError(format!("env: {e}")))?;
        self.reward.validate().map_err(|e| ConfigError(format!("reward: {e}")))?;
        self.ppo.validate().map_err(ConfigError)?;
        for spec in &self.logging.extra_rewards {
            spec.validate().map_err(|e| ConfigError(format!("logging.extra_rewards: {e}")))?;
        }
        if self.logging.duration == 0 {
            return Err(ConfigError("logging.duration must be at least 1".into()));
        }
        if self.backend.kind == BackendKind::Remote && self.backend.resolved_endpoint().is_none() {
            return Err(ConfigError(format!(
                "backend.kind = \"remote\" needs backend.endpoint or {}",
                crate::embedding::ENDPOINT_ENV
            )));
        }
        Ok(())
    }

    /// Training reward first, then GRAD, then extras, without duplicates.
    pub fn logged_rewards(&self) -> Vec<RewardSpec> {
        let mut out: Vec<RewardSpec> = vec![];
        for spec in [self.reward.clone(), RewardSpec::Grad].into_iter().chain(self.logging.extra_rewards.clone()) {
            if !out.iter().any(|s| s.name() == spec.name()) {
                out.push(spec);
            }
        }
        out
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.reward.name().replace(['(', ')', '+'], "_"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub seed: u64,
    pub code_version: String,
    pub config: RunConfig,
    pub backends: Vec<BackendDescriptor>,
}

impl RunManifest {
    pub fn new(run_id: String, config: RunConfig, backends: Vec<BackendDescriptor>) -> Self {
        let created_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            run_id,
            created_unix,
            seed: config.ppo.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            backends,
        }
    }

    pub fn modalities(&self) -> Vec<Modality> {
        let mut out = vec![];
        for spec in self.config.logged_rewards() {
            for m in spec.modalities() {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        out
    }
}
