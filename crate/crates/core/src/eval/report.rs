use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, DrivingPolicy, EpisodeLog, EvalError};
use crate::embedding::BackendConfig;
use crate::reward::{grad_reward, RewardEngine, RewardSpec};
use crate::sim::{reset, EnvConfig};

/// The fixed evaluation seeds, one episode each.
pub const EVAL_SEEDS: [u64; 17] = [11, 23, 37, 41, 59, 67, 73, 89, 97, 101, 113, 127, 131, 149, 157, 163, 179];

/// Settings used for the generalization table.
pub const EVAL_SETTINGS: [&str; 3] = ["lane-4-density-2", "lane-5-density-2.5", "lane-5-density-3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub traveled_distance: f64,
    /// Episode sum of the GRAD reward.
    pub rewards: f64,
}

impl SeedRow {
    pub fn from_log(log: &EpisodeLog) -> Self {
        Self {
            seed: log.seed,
            success: log.success(),
            steps: log.steps.len(),
            traveled_distance: log.traveled_distance(),
            rewards: log.steps.iter().map(|s| grad_reward(s.ego_speed, s.collided)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: String,
    pub policy: String,
    pub seeds: Vec<u64>,
    /// Percent of episodes that survived the full duration.
    pub success_rate: f64,
    pub mean_traveled_distance: f64,
    pub mean_rewards: f64,
    pub rows: Vec<SeedRow>,
}

impl EvalReport {
    pub fn from_logs(setting: &str, policy: &str, logs: &[EpisodeLog]) -> Self {
        let rows: Vec<SeedRow> = logs.iter().map(SeedRow::from_log).collect();
        let n = rows.len().max(1) as f64;
        let successes = rows.iter().filter(|r| r.success).count();
        Self {
            setting: setting.to_string(),
            policy: policy.to_string(),
            seeds: rows.iter().map(|r| r.seed).collect(),
            success_rate: 100.0 * successes as f64 / n,
            mean_traveled_distance: rows.iter().map(|r| r.traveled_distance).sum::<f64>() / n,
            mean_rewards: rows.iter().map(|r| r.rewards).sum::<f64>() / n,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,policy,seed,success,steps,traveled_distance,rewards\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{:.4}\n",
                self.setting, self.policy, r.seed, r.success, r.steps, r.traveled_distance, r.rewards
            ));
        }
        out
    }
}

/// Text table with one SR/TD/RE column group per setting and one row per policy.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut settings: Vec<&str> = vec![];
    let mut policies: Vec<&str> = vec![];
    for r in reports {
        if !settings.contains(&r.setting.as_str()) {
            settings.push(&r.setting);
        }
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let name_w = policies.iter().map(|p| p.len()).max().unwrap_or(0).max(6);
    let group_w = 24;
    let mut out = format!("{:<name_w$}", "Method");
    for s in &settings {
        out.push_str(&format!(" | {s:^group_w$}"));
    }
    out.push('\n');
    out.push_str(&" ".repeat(name_w));
    for _ in &settings {
        out.push_str(&format!(" | {:>7} {:>8} {:>7}", "SR", "TD", "RE"));
    }
    out.push('\n');
    for p in &policies {
        out.push_str(&format!("{p:<name_w$}"));
        for s in &settings {
            match reports.iter().find(|r| r.policy == *p && r.setting == *s) {
                Some(r) => out.push_str(&format!(
                    " | {:>7.2} {:>8.2} {:>7.2}",
                    r.success_rate, r.mean_traveled_distance, r.mean_rewards
                )),
                None => out.push_str(&format!(" | {:>7} {:>8} {:>7}", "-", "-", "-")),
            }
        }
        out.push('\n');
    }
    out
}

/// Runs one episode per seed in parallel. Extra reward specs are only logged.
pub fn evaluate(
    policy: &dyn DrivingPolicy,
    setting: &str,
    config: &EnvConfig,
    seeds: &[u64],
    logged: &[RewardSpec],
    backend: &BackendConfig,
) -> Result<(EvalReport, Vec<EpisodeLog>), EvalError> {
    config.validate()?;
    let logs = seeds
        .par_iter()
        .map(|&seed| {
            let mut engines = logged
                .iter()
                .map(|spec| RewardEngine::new(spec.clone(), |m| backend.build(m)))
                .collect::<Result<Vec<_>, _>>()?;
            run_episode(reset(config, seed)?, seed, policy, &mut engines)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((EvalReport::from_logs(setting, &policy.name(), &logs), logs))
}
