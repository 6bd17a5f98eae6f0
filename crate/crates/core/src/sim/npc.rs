//! Npc driver model: IDM car following and MOBIL lane changes.

use super::{LaneChange, VehicleState};

#[derive(Debug, Clone, PartialEq)]
pub struct NpcParams {
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Jam distance (m).
    pub min_gap: f64,
    /// Maximum acceleration (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration (m/s²).
    pub comfort_decel: f64,
    /// Hard braking bound (m/s²), used for clipping and emergencies.
    pub max_decel: f64,
    pub politeness: f64,
    /// Minimum acceleration gain (m/s²) that justifies a lane change.
    pub lane_change_threshold: f64,
    /// Largest deceleration (m/s²) a lane change may impose on the new follower.
    pub safe_decel: f64,
    pub lane_count: usize,
    pub vehicle_length: f64,
}

impl NpcParams {
    pub fn new(lane_count: usize, vehicle_length: f64) -> Self {
        Self {
            time_headway: 1.5,
            min_gap: 10.0,
            max_accel: 3.0,
            comfort_decel: 5.0,
            max_decel: 9.0,
            politeness: 0.3,
            lane_change_threshold: 0.2,
            safe_decel: 2.0,
            lane_count,
            vehicle_length,
        }
    }
}

/// Leader seen by a follower: bumper gap (m) and leader speed (m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
}

/// Intelligent Driver Model acceleration, clipped to `[-max_decel, max_accel]`.
pub fn idm_acceleration(speed: f64, desired_speed: f64, leader: Option<Leader>, p: &NpcParams) -> f64 {
    let free = if desired_speed > 0.0 { 1.0 - (speed / desired_speed).powi(4) } else { -1.0 };
    let accel = match leader {
        None => p.max_accel * free,
        Some(Leader { gap, .. }) if gap <= 0.0 => -p.max_decel,
        Some(Leader { gap, speed: lead_speed }) => {
            let approach = speed - lead_speed;
            let desired_gap = p.min_gap
                + speed * p.time_headway
                + speed * approach / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
            p.max_accel * (free - (desired_gap / gap).powi(2))
        }
    };
    accel.clamp(-p.max_decel, p.max_accel)
}

fn gap_between(rear: &VehicleState, front: &VehicleState, length: f64) -> f64 {
    front.x - rear.x - length
}

/// Nearest vehicle ahead of `x` in `lane`, skipping `skip`.
pub fn leader_in_lane<'a>(
    vehicles: &'a [VehicleState],
    lane: usize,
    x: f64,
    skip: u32,
) -> Option<&'a VehicleState> {
    vehicles
        .iter()
        .filter(|v| v.id != skip && v.in_lane(lane) && v.x > x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
}

/// Nearest vehicle behind (or level with) `x` in `lane`, skipping `skip`.
pub fn follower_in_lane<'a>(
    vehicles: &'a [VehicleState],
    lane: usize,
    x: f64,
    skip: u32,
) -> Option<&'a VehicleState> {
    vehicles
        .iter()
        .filter(|v| v.id != skip && v.in_lane(lane) && v.x <= x)
        .max_by(|a, b| a.x.total_cmp(&b.x))
}

fn accel_behind(rear: &VehicleState, front: Option<&VehicleState>, p: &NpcParams) -> f64 {
    let leader = front.map(|f| Leader { gap: gap_between(rear, f, p.vehicle_length), speed: f.speed });
    idm_acceleration(rear.speed, rear.target_speed, leader, p)
}

/// Longitudinal acceleration and an optional lane-change decision for an npc.
///
/// `neighbors` may contain the vehicle itself; it is skipped by id. The
/// lane-change decision is only offered when the vehicle is settled in its
/// lane and not crashed.
pub fn npc_control(
    vehicle: &VehicleState,
    neighbors: &[VehicleState],
    params: &NpcParams,
) -> (f64, Option<LaneChange>) {
    debug_assert!(!vehicle.is_ego);
    if vehicle.crashed {
        return (-params.max_decel, None);
    }
    let lane = vehicle.target_lane;
    let leader = leader_in_lane(neighbors, lane, vehicle.x, vehicle.id);
    let accel = accel_behind(vehicle, leader, params);
    if vehicle.lane_index != vehicle.target_lane {
        // mid-change: respect the leaders of both lanes
        let old_leader = leader_in_lane(neighbors, vehicle.lane_index, vehicle.x, vehicle.id);
        return (accel.min(accel_behind(vehicle, old_leader, params)), None);
    }

    let old_follower = follower_in_lane(neighbors, lane, vehicle.x, vehicle.id);
    let mut best: Option<(f64, LaneChange)> = None;
    for dir in [LaneChange::Left, LaneChange::Right] {
        let Some(new_lane) = dir.apply(lane, params.lane_count) else { continue };
        let new_leader = leader_in_lane(neighbors, new_lane, vehicle.x, vehicle.id);
        let new_follower = follower_in_lane(neighbors, new_lane, vehicle.x, vehicle.id);

        if let Some(f) = new_leader {
            if gap_between(vehicle, f, params.vehicle_length) <= 0.0 {
                continue;
            }
        }
        let mut follower_gain = 0.0;
        if let Some(f) = new_follower {
            if gap_between(f, vehicle, params.vehicle_length) <= 0.0 {
                continue;
            }
            let after = accel_behind(f, Some(vehicle), params);
            if after < -params.safe_decel {
                continue;
            }
            follower_gain += after - accel_behind(f, new_leader, params);
        }
        if let Some(f) = old_follower {
            follower_gain += accel_behind(f, leader, params) - accel_behind(f, Some(vehicle), params);
        }
        let self_gain = accel_behind(vehicle, new_leader, params) - accel;
        let incentive = self_gain + params.politeness * follower_gain;
        if incentive > params.lane_change_threshold && best.is_none_or(|(b, _)| incentive > b) {
            best = Some((incentive, dir));
        }
    }
    (accel, best.map(|(_, d)| d))
}
