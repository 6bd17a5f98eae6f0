use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::collision::check_collision;
use super::npc::{npc_control, NpcParams};
use super::{EnvConfig, LaneChange, MetaAction, SimError, VehicleState};

const MAX_SPAWN_RETRIES: usize = 100;
const KP_SPEED: f64 = 1.0 / 0.6;
const KP_LATERAL: f64 = 1.0 / 0.6;
const KP_HEADING: f64 = 1.0 / 0.2;
const MAX_HEADING_OFFSET: f64 = std::f64::consts::FRAC_PI_4;
const EGO_MAX_ACCEL: f64 = 5.0;
/// Lateral tolerance (m) for an npc to count as settled in its lane.
const SETTLED_TOLERANCE: f64 = 0.3;

/// Simulator ground truth. The ego vehicle is always `vehicles[0]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub vehicles: Vec<VehicleState>,
    pub step_index: usize,
    pub config: EnvConfig,
    /// Set once the episode has terminated or been truncated.
    pub done: bool,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.vehicles == other.vehicles
            && self.step_index == other.step_index
            && self.config == other.config
            && self.done == other.done
            && self.rng == other.rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub collided: bool,
    pub ego_speed: f64,
    pub ego_x: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub step_index: usize,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

impl WorldState {
    /// Build a world from explicit vehicles (ego first) for scripted scenes.
    pub fn from_vehicles(config: EnvConfig, vehicles: Vec<VehicleState>, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let egos = vehicles.iter().filter(|v| v.is_ego).count();
        if egos != 1 || !vehicles.first().is_some_and(|v| v.is_ego) {
            return Err(SimError::Config("exactly one ego vehicle, placed first, is required".into()));
        }
        if vehicles.iter().any(|v| v.lane_index >= config.lane_count || v.target_lane >= config.lane_count) {
            return Err(SimError::Config("vehicle lane outside the road".into()));
        }
        Ok(Self { vehicles, step_index: 0, config, done: false, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    pub fn ego_mut(&mut self) -> &mut VehicleState {
        &mut self.vehicles[0]
    }

    pub fn npcs(&self) -> &[VehicleState] {
        &self.vehicles[1..]
    }

    pub fn npc_params(&self) -> NpcParams {
        NpcParams::new(self.config.lane_count, self.config.vehicle_length)
    }

    fn overlaps_any(&self, v: &VehicleState) -> bool {
        let c = &self.config;
        self.vehicles.iter().any(|o| check_collision(o, v, c.vehicle_length, c.vehicle_width))
    }
}

/// Start a fresh episode. Identical `(config, seed)` give identical worlds.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<WorldState, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lanes = config.lane_count;

    let ego_lane = rng.random_range(0..lanes);
    let ego_speed = config.target_speeds[rng.random_range(0..config.target_speeds.len())];
    let ego = VehicleState {
        id: 0,
        lane_index: ego_lane,
        target_lane: ego_lane,
        x: 0.0,
        y: config.lane_center(ego_lane),
        speed: ego_speed,
        heading: 0.0,
        target_speed: ego_speed,
        crashed: false,
        is_ego: true,
    };
    let mut world = WorldState {
        vehicles: vec![ego],
        step_index: 0,
        config: config.clone(),
        done: false,
        rng: ChaCha8Rng::seed_from_u64(0),
    };

    // mean spacing between consecutive spawns, all lanes together
    let mean_gap = config.ego_spacing * config.vehicle_length / config.vehicles_density;
    let params = NpcParams::new(config.lane_count, config.vehicle_length);
    // same-lane neighbours start at least one jam distance apart
    let min_lane_gap = config.vehicle_length + params.min_gap;
    let ego_clearance = config.ego_spacing * config.vehicle_length;
    let (v_lo, v_hi) = npc_speed_range(config);
    let n_behind = config.spawn_count / 5;
    let n_ahead = config.spawn_count - n_behind;

    for (count, direction) in [(n_ahead, 1.0), (n_behind, -1.0)] {
        let mut frontier = 0.0;
        for _ in 0..count {
            let mut placed = false;
            for attempt in 0..MAX_SPAWN_RETRIES {
                let lane = rng.random_range(0..lanes);
                // widen the window once a crowded frontier keeps rejecting candidates
                let widen = 1.0 + attempt.saturating_sub(20) as f64 * 0.1;
                let x = frontier + direction * mean_gap * widen * rng.random_range(0.5..1.5);
                let desired = rng.random_range(v_lo..=v_hi);
                let initial = desired * rng.random_range(0.8..=1.0);
                let id = world.vehicles.len() as u32;
                let cand = VehicleState {
                    id,
                    lane_index: lane,
                    target_lane: lane,
                    x,
                    y: config.lane_center(lane),
                    speed: initial,
                    heading: 0.0,
                    target_speed: desired,
                    crashed: false,
                    is_ego: false,
                };
                let crowded = world.vehicles.iter().any(|o| {
                    let needed = if o.is_ego { ego_clearance.max(min_lane_gap) } else { min_lane_gap };
                    o.lane_index == lane && (o.x - x).abs() < needed
                });
                if !crowded && !world.overlaps_any(&cand) {
                    world.vehicles.push(cand);
                    frontier = x;
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(SimError::Spawn { retries: MAX_SPAWN_RETRIES });
            }
        }
    }
    world.rng = rng;
    Ok(world)
}

/// Npc desired speeds span the middle half of the ego's speed range.
fn npc_speed_range(config: &EnvConfig) -> (f64, f64) {
    let lo = config.min_speed();
    let span = config.max_speed() - lo;
    (lo + span / 4.0, lo + 3.0 * span / 4.0)
}

/// Advance one policy step.
pub fn step(world: &mut WorldState, action: MetaAction) -> Result<StepOutcome, SimError> {
    step_observed(world, action, |_| {})
}

/// Like [`step`], calling `observer` after every simulation substep.
pub fn step_observed(
    world: &mut WorldState,
    action: MetaAction,
    mut observer: impl FnMut(&WorldState),
) -> Result<StepOutcome, SimError> {
    if world.done {
        return Err(SimError::Lifecycle("step called on a finished episode".into()));
    }
    apply_meta_action(world, action);
    plan_npc_lane_changes(world);

    let mut collided = false;
    for _ in 0..world.config.substeps() {
        substep(world);
        collided = detect_collisions(world);
        observer(world);
        if collided {
            break;
        }
    }

    world.step_index += 1;
    let truncated = !collided && world.step_index >= world.config.duration;
    world.done = collided || truncated;
    let ego = world.ego();
    Ok(StepOutcome {
        collided,
        ego_speed: ego.speed,
        ego_x: ego.x,
        terminated: collided,
        truncated,
        step_index: world.step_index,
    })
}

fn apply_meta_action(world: &mut WorldState, action: MetaAction) {
    let lanes = world.config.lane_count;
    let speeds = world.config.target_speeds.clone();
    let ego = world.ego_mut();
    let change = match action {
        MetaAction::LaneLeft => Some(LaneChange::Left),
        MetaAction::LaneRight => Some(LaneChange::Right),
        _ => None,
    };
    if let Some(dir) = change {
        if let Some(lane) = dir.apply(ego.target_lane, lanes) {
            ego.target_lane = lane;
        }
    }
    let current = speed_index(&speeds, ego.target_speed);
    let next = match action {
        MetaAction::Faster => (current + 1).min(speeds.len() - 1),
        MetaAction::Slower => current.saturating_sub(1),
        _ => current,
    };
    ego.target_speed = speeds[next];
}

/// Index of the target speed closest to `speed`.
fn speed_index(speeds: &[f64], speed: f64) -> usize {
    speeds
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - speed).abs().total_cmp(&(b.1 - speed).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Decisions are applied one vehicle at a time so later vehicles see the
/// lanes already claimed by earlier ones.
fn plan_npc_lane_changes(world: &mut WorldState) {
    let params = world.npc_params();
    let lanes = world.config.lane_count;
    for i in 1..world.vehicles.len() {
        let v = &world.vehicles[i];
        if (v.y - world.config.lane_center(v.lane_index)).abs() >= SETTLED_TOLERANCE {
            continue;
        }
        let (_, change) = npc_control(v, &world.vehicles, &params);
        if let Some(lane) = change.and_then(|d| d.apply(v.target_lane, lanes)) {
            world.vehicles[i].target_lane = lane;
        }
    }
}

fn substep(world: &mut WorldState) {
    let params = world.npc_params();
    let accels: Vec<f64> = world
        .vehicles
        .iter()
        .map(|v| {
            if v.is_ego {
                (KP_SPEED * (v.target_speed - v.speed)).clamp(-params.max_decel, EGO_MAX_ACCEL)
            } else {
                npc_control(v, &world.vehicles, &params).0
            }
        })
        .collect();

    let config = &world.config;
    let dt = config.dt();
    for (v, accel) in world.vehicles.iter_mut().zip(accels) {
        v.x += v.speed * v.heading.cos() * dt;
        v.y += v.speed * v.heading.sin() * dt;

        let lateral_error = v.y - config.lane_center(v.target_lane);
        let lateral_cmd = -KP_LATERAL * lateral_error;
        let heading_cmd = (lateral_cmd / v.speed.max(1.0))
            .clamp(-1.0, 1.0)
            .asin()
            .clamp(-MAX_HEADING_OFFSET, MAX_HEADING_OFFSET);
        v.heading += KP_HEADING * (heading_cmd - v.heading) * dt;
        v.speed = (v.speed + accel * dt).max(0.0);
        v.lane_index = config.lane_of(v.y);
    }
}

/// Marks crashed vehicles; returns whether the ego was involved.
fn detect_collisions(world: &mut WorldState) -> bool {
    let (length, width) = (world.config.vehicle_length, world.config.vehicle_width);
    let n = world.vehicles.len();
    let mut ego_hit = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if check_collision(&world.vehicles[i], &world.vehicles[j], length, width) {
                world.vehicles[i].crashed = true;
                world.vehicles[j].crashed = true;
                ego_hit |= i == 0;
            }
        }
    }
    ego_hit
}
