use crate::sim::WorldState;

/// Feature columns: presence, x, y, vx, vy, cos_h, sin_h, heading.
pub const FEATURES: usize = 8;
const POSITION_SCALE: f64 = 100.0;
const SPEED_SCALE: f64 = 40.0;

/// `rows × 8` kinematics array, ego row first, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsObs {
    rows: usize,
    data: Vec<f64>,
}

impl KinematicsObs {
    pub fn zeros(rows: usize) -> Self {
        Self { rows, data: vec![0.0; rows * FEATURES] }
    }

    pub fn from_flat(rows: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * FEATURES).then_some(Self { rows, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURES..(i + 1) * FEATURES]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn presence(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i)[0]).collect()
    }
}

/// Ego row followed by the nearest other vehicles (ahead or behind).
///
/// Positions are relative to the ego and scaled by 100 m, velocities by
/// 40 m/s, heading by π; everything is clipped to [-1, 1].
pub fn build_kinematics(world: &WorldState) -> KinematicsObs {
    let rows = world.config.observed_vehicles;
    let mut obs = KinematicsObs::zeros(rows);
    let ego = world.ego();

    let mut others: Vec<_> = world.npcs().iter().collect();
    others.sort_by(|a, b| {
        let da = (a.x - ego.x).hypot(a.y - ego.y);
        let db = (b.x - ego.x).hypot(b.y - ego.y);
        da.total_cmp(&db).then(a.id.cmp(&b.id))
    });

    let clip = |v: f64| v.clamp(-1.0, 1.0);
    for (row, v) in std::iter::once(ego).chain(others).take(rows).enumerate() {
        let (dx, dy) = if v.is_ego { (0.0, 0.0) } else { (v.x - ego.x, v.y - ego.y) };
        let (sin_h, cos_h) = v.heading.sin_cos();
        let features = [
            1.0,
            clip(dx / POSITION_SCALE),
            clip(dy / POSITION_SCALE),
            clip(v.vx() / SPEED_SCALE),
            clip(v.vy() / SPEED_SCALE),
            cos_h,
            sin_h,
            clip(v.heading / std::f64::consts::PI),
        ];
        obs.data[row * FEATURES..(row + 1) * FEATURES].copy_from_slice(&features);
    }
    obs
}
