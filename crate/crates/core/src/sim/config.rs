use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Highway environment configuration. Field names follow the usual
/// highway-env keys so configuration files read the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub lane_count: usize,
    pub vehicles_density: f64,
    /// Episode length in policy steps.
    pub duration: usize,
    pub ego_spacing: f64,
    /// Rows of the kinematics observation, ego included.
    #[serde(alias = "vehicles_count")]
    pub observed_vehicles: usize,
    /// Ego target speeds (m/s) reachable with Faster/Slower.
    pub target_speeds: Vec<f64>,
    pub policy_frequency: f64,
    pub sim_frequency: f64,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Number of npc vehicles placed at reset.
    pub spawn_count: usize,
    /// Base seed for the episode resets drawn during training.
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            lane_count: 4,
            vehicles_density: 2.0,
            duration: 60,
            ego_spacing: 4.0,
            observed_vehicles: 33,
            target_speeds: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            policy_frequency: 1.0,
            sim_frequency: 15.0,
            lane_width: 4.0,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            spawn_count: 50,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Training defaults (duration 60).
    pub fn training() -> Self {
        Self::default()
    }

    /// Evaluation defaults (duration 30).
    pub fn testing() -> Self {
        Self { duration: 30, ..Self::default() }
    }

    /// Evaluation config for a `lane-<n>-density-<d>` setting name.
    pub fn for_setting(name: &str) -> Result<Self, SimError> {
        let bad = || SimError::Config(format!("unrecognized setting `{name}`, expected lane-<n>-density-<d>"));
        let rest = name.strip_prefix("lane-").ok_or_else(bad)?;
        let (lanes, density) = rest.split_once("-density-").ok_or_else(bad)?;
        let lane_count: usize = lanes.parse().map_err(|_| bad())?;
        let vehicles_density: f64 = density.parse().map_err(|_| bad())?;
        let config = Self { lane_count, vehicles_density, ..Self::testing() };
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::Config(msg.to_owned()));
        if self.lane_count < 2 {
            return fail("lane_count must be at least 2");
        }
        if !(self.vehicles_density > 0.0 && self.vehicles_density.is_finite()) {
            return fail("vehicles_density must be positive");
        }
        if self.duration < 1 {
            return fail("duration must be at least 1");
        }
        if self.observed_vehicles < 1 {
            return fail("observed_vehicles must be at least 1");
        }
        if !(self.ego_spacing > 0.0 && self.ego_spacing.is_finite()) {
            return fail("ego_spacing must be positive");
        }
        if self.target_speeds.is_empty() {
            return fail("target_speeds must not be empty");
        }
        if self.target_speeds.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return fail("target_speeds must be finite and non-negative");
        }
        if self.target_speeds.windows(2).any(|w| w[1] <= w[0]) {
            return fail("target_speeds must be strictly increasing");
        }
        if !(self.policy_frequency > 0.0 && self.sim_frequency > 0.0) {
            return fail("frequencies must be positive");
        }
        let ratio = self.sim_frequency / self.policy_frequency;
        if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return fail("sim_frequency must be an integer multiple of policy_frequency");
        }
        if !(self.lane_width > 0.0 && self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return fail("lane_width and vehicle dimensions must be positive");
        }
        if self.vehicle_width > self.lane_width {
            return fail("vehicle_width must not exceed lane_width");
        }
        Ok(())
    }

    /// Simulation substeps per policy step.
    pub fn substeps(&self) -> usize {
        (self.sim_frequency / self.policy_frequency).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sim_frequency
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Nearest lane to a lateral position, clamped to the road.
    pub fn lane_of(&self, y: f64) -> usize {
        let lane = (y / self.lane_width).round();
        lane.clamp(0.0, (self.lane_count - 1) as f64) as usize
    }

    pub fn min_speed(&self) -> f64 {
        self.target_speeds[0]
    }

    pub fn max_speed(&self) -> f64 {
        *self.target_speeds.last().expect("validated non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EnvConfig::default();
        c.validate().unwrap();
        assert_eq!(c.observed_vehicles, 33);
        assert_eq!(c.target_speeds, vec![20.0, 25.0, 30.0, 35.0, 40.0]);
        assert_eq!(c.ego_spacing, 4.0);
        assert_eq!(c.duration, 60);
        assert_eq!(EnvConfig::testing().duration, 30);
        assert_eq!(c.substeps(), 15);
    }

    #[test]
    fn parses_table_style_keys() {
        let c = EnvConfig::from_toml_str(
            "lane_count = 5\nvehicles_density = 2.5\nvehicles_count = 20\nduration = 30\n\
             target_speeds = [20, 25, 30, 35, 40]\nego_spacing = 4\n",
        )
        .unwrap();
        assert_eq!(c.lane_count, 5);
        assert_eq!(c.vehicles_density, 2.5);
        assert_eq!(c.observed_vehicles, 20);
        assert_eq!(c.sim_frequency, 15.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = EnvConfig::from_toml_str("lane_count = 4\nspeed_limit = 3\n").unwrap_err();
        assert!(err.to_string().contains("speed_limit"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "lane_count = 1",
            "vehicles_density = 0",
            "duration = 0",
            "observed_vehicles = 0",
            "target_speeds = [20, 20, 30]",
            "sim_frequency = 10\npolicy_frequency = 3",
        ] {
            assert!(EnvConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn setting_names() {
        let c = EnvConfig::for_setting("lane-5-density-2.5").unwrap();
        assert_eq!((c.lane_count, c.vehicles_density, c.duration), (5, 2.5, 30));
        assert!(EnvConfig::for_setting("lanes-5").is_err());
        assert!(EnvConfig::for_setting("lane-1-density-2").is_err());
    }
}
