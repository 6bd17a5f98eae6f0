use serde::{Deserialize, Serialize};

use super::{EpisodeLog, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub front_gap_m: f64,
    pub speed_diff_mps: f64,
    pub reward: f64,
    pub collided: bool,
}

/// Every logged step that has a front vehicle, with the named reward.
pub fn reward_landscape(logs: &[EpisodeLog], reward: &str) -> Result<Vec<LandscapeRow>, EvalError> {
    let mut rows = vec![];
    for log in logs {
        let idx = log.reward_index(reward).ok_or_else(|| {
            EvalError::Input(format!("reward `{reward}` not logged (available: {})", log.reward_names.join(", ")))
        })?;
        rows.extend(log.steps.iter().filter(|s| s.front_gap.is_finite()).map(|s| LandscapeRow {
            front_gap_m: s.front_gap,
            speed_diff_mps: s.speed_diff,
            reward: s.rewards[idx],
            collided: s.collided,
        }));
    }
    Ok(rows)
}

pub fn landscape_csv(rows: &[LandscapeRow]) -> String {
    let mut out = String::from("front_gap_m,speed_diff_mps,reward,collided\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.front_gap_m, r.speed_diff_mps, r.reward, r.collided));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub collided_rows: usize,
    pub free_rows: usize,
    pub collided_mean: Option<f64>,
    pub free_mean: Option<f64>,
    /// `free_mean - collided_mean`.
    pub difference: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> (usize, Option<f64>) {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n, (n > 0).then(|| sum / n as f64))
}

pub fn summarize(rows: &[LandscapeRow]) -> LandscapeSummary {
    let (collided_rows, collided_mean) = mean(rows.iter().filter(|r| r.collided).map(|r| r.reward));
    let (free_rows, free_mean) = mean(rows.iter().filter(|r| !r.collided).map(|r| r.reward));
    let difference = collided_mean.zip(free_mean).map(|(c, f)| f - c);
    LandscapeSummary { collided_rows, free_rows, collided_mean, free_mean, difference }
}

/// Mean reward in four equal-count bins of ascending `speed_diff`.
pub fn speed_diff_quartile_means(rows: &[LandscapeRow]) -> Vec<f64> {
    let mut sorted: Vec<&LandscapeRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.speed_diff_mps.total_cmp(&b.speed_diff_mps));
    let n = sorted.len();
    (0..4)
        .filter_map(|q| {
            let bin = &sorted[q * n / 4..(q + 1) * n / 4];
            mean(bin.iter().map(|r| r.reward)).1
        })
        .collect()
}
