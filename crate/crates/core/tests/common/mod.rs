//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use lord_core::ppo::{loss_and_grad, LossCoefs, PolicyParams, UpdateBatch};
use lord_core::sim::{EnvConfig, VehicleState};

pub fn car(id: u32, lane: usize, x: f64, speed: f64) -> VehicleState {
    VehicleState {
        id,
        lane_index: lane,
        target_lane: lane,
        x,
        y: lane as f64 * 4.0,
        speed,
        heading: 0.0,
        target_speed: speed,
        crashed: false,
        is_ego: id == 0,
    }
}

pub fn testing_config() -> EnvConfig {
    EnvConfig::testing()
}

/// Word n-grams of template sentences: sentences end in `.` followed by a
/// space or the end of text; words are separated by single spaces.
pub fn template_tokens(text: &str) -> Vec<String> {
    let mut out = vec![];
    for sentence in text.split(". ") {
        let words: Vec<String> =
            sentence.trim_end_matches('.').split(' ').filter(|w| !w.is_empty()).map(str::to_lowercase).collect();
        for w in &words {
            out.push(w.clone());
        }
        for pair in words.windows(2) {
            out.push(format!("{} {}", pair[0], pair[1]));
        }
    }
    out
}

/// Exact cosine between token-count vectors.
pub fn sparse_cosine(a: &str, b: &str) -> f64 {
    let count = |t: &str| {
        let mut m: HashMap<String, f64> = HashMap::new();
        for tok in template_tokens(t) {
            *m.entry(tok).or_default() += 1.0;
        }
        m
    };
    let (ca, cb) = (count(a), count(b));
    let dot: f64 = ca.iter().map(|(k, v)| v * cb.get(k).copied().unwrap_or(0.0)).sum();
    let na: f64 = ca.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = cb.values().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn to_local(px: f64, py: f64, v: &VehicleState) -> (f64, f64) {
    let (s, c) = v.heading.sin_cos();
    let (dx, dy) = (px - v.x, py - v.y);
    (dx * c + dy * s, -dx * s + dy * c)
}

pub fn point_inside(px: f64, py: f64, v: &VehicleState, length: f64, width: f64) -> bool {
    let (lx, ly) = to_local(px, py, v);
    lx.abs() < length / 2.0 && ly.abs() < width / 2.0
}

/// Samples an `n x n` interior grid plus `8n` points along the (slightly
/// inset) perimeter of each rectangle and reports whether any sample lies
/// strictly inside the other rectangle. Perimeter samples catch the thin
/// slivers a grid alone can step over.
pub fn sampled_overlap(a: &VehicleState, b: &VehicleState, length: f64, width: f64, n: usize) -> bool {
    let hits = |p: &VehicleState, q: &VehicleState| {
        let (s, c) = p.heading.sin_cos();
        let inside = |u: f64, w: f64| point_inside(p.x + u * c - w * s, p.y + u * s + w * c, q, length, width);
        for i in 0..n {
            for j in 0..n {
                let u = ((i as f64 + 0.5) / n as f64 - 0.5) * length;
                let w = ((j as f64 + 0.5) / n as f64 - 0.5) * width;
                if inside(u, w) {
                    return true;
                }
            }
        }
        let inset = 1e-9;
        let (hl, hw) = (length / 2.0 - inset, width / 2.0 - inset);
        let m = 8 * n;
        for k in 0..=m {
            let t = k as f64 / m as f64;
            let u = -hl + 2.0 * hl * t;
            let w = -hw + 2.0 * hw * t;
            if inside(u, hw) || inside(u, -hw) || inside(hl, w) || inside(-hl, w) {
                return true;
            }
        }
        false
    };
    hits(a, b) || hits(b, a)
}

/// `A_t = sum_l (gamma lambda)^l delta_{t+l}`, truncated at the first done.
pub fn gae_brute_force(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| {
        let live = if dones[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * next_value(t) * live - values[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..(n - t) {
                sum += (gamma * lambda).powi(l as i32) * delta(t + l);
                if dones[t + l] {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// Largest relative error between analytic and central-difference gradients,
/// computed over the whole parameter vector as `|a - f| / max(|a|, |f|)`.
pub fn finite_difference_error(params: &PolicyParams, batch: &UpdateBatch, coefs: LossCoefs) -> f64 {
    let (_, grad) = loss_and_grad(params, batch, coefs);
    let loss = |p: &PolicyParams| loss_and_grad(p, batch, coefs).0.total;
    let h = 1e-6;
    let mut analytic = vec![];
    let mut numeric = vec![];
    for (net_index, layers) in [&grad.actor.layers, &grad.critic.layers].into_iter().enumerate() {
        for (li, layer) in layers.iter().enumerate() {
            let n_w = layer.weight.len();
            for idx in 0..n_w + layer.bias.len() {
                let nudge = |delta: f64| {
                    let mut p = params.clone();
                    let net = if net_index == 0 { &mut p.actor } else { &mut p.critic };
                    if idx < n_w {
                        net.layers[li].weight.as_slice_mut().unwrap()[idx] += delta;
                    } else {
                        net.layers[li].bias[idx - n_w] += delta;
                    }
                    loss(&p)
                };
                numeric.push((nudge(h) - nudge(-h)) / (2.0 * h));
                analytic.push(if idx < n_w { layer.weight.as_slice().unwrap()[idx] } else { layer.bias[idx - n_w] });
            }
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nf: f64 = numeric.iter().map(|f| f * f).sum::<f64>().sqrt();
    diff / na.max(nf).max(1e-300)
}
