use serde::{Deserialize, Serialize};

use crate::sim::WorldState;

/// Attention radius as a multiple of ego speed (m per m/s).
pub const ATTENTION_SECONDS: f64 = 5.0;
/// Floor for bumper-to-bumper gaps (m).
pub const MIN_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneRelation {
    Same,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcEntry {
    pub vehicle_id: u32,
    pub relation: LaneRelation,
    /// Seconds, `f64::INFINITY` when not closing.
    pub ttc: f64,
    /// Bumper-to-bumper distance (m).
    pub gap: f64,
    /// `v_other - v_ego` (m/s).
    pub speed_diff: f64,
    /// Whether the other vehicle is ahead of (or level with) the ego.
    pub ahead: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TtcReport {
    pub entries: Vec<TtcEntry>,
}

impl TtcReport {
    pub fn by_relation(&self, relation: LaneRelation) -> impl Iterator<Item = &TtcEntry> {
        self.entries.iter().filter(move |e| e.relation == relation)
    }
}

/// Bumper gap between two vehicle centers along the road.
pub fn bumper_gap(center_distance: f64, vehicle_length: f64) -> f64 {
    (center_distance.abs() - vehicle_length).max(MIN_GAP)
}

/// Time to collision with every vehicle within `5 × ego_speed` meters on the
/// ego lane or the adjacent ones.
///
/// Same lane: only vehicles ahead can produce a finite ttc. Adjacent lanes:
/// vehicles ahead that the ego is closing on, and vehicles behind closing on
/// the ego.
pub fn compute_ttc(world: &WorldState) -> TtcReport {
    let ego = world.ego();
    let radius = ATTENTION_SECONDS * ego.speed;
    let length = world.config.vehicle_length;
    let entries = world
        .npcs()
        .iter()
        .filter_map(|v| {
            let relation = if v.lane_index == ego.lane_index {
                LaneRelation::Same
            } else if v.lane_index + 1 == ego.lane_index {
                LaneRelation::Left
            } else if v.lane_index == ego.lane_index + 1 {
                LaneRelation::Right
            } else {
                return None;
            };
            let dx = v.x - ego.x;
            if dx.abs() > radius {
                return None;
            }
            let gap = bumper_gap(dx, length);
            let ahead = dx >= 0.0;
            let closing = match (ahead, relation) {
                (true, _) => ego.speed - v.speed,
                (false, LaneRelation::Same) => 0.0,
                (false, _) => v.speed - ego.speed,
            };
            let ttc = if closing > 0.0 { gap / closing } else { f64::INFINITY };
            Some(TtcEntry { vehicle_id: v.id, relation, ttc, gap, speed_diff: v.speed - ego.speed, ahead })
        })
        .collect();
    TtcReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{EnvConfig, VehicleState};

    fn car(id: u32, lane: usize, x: f64, speed: f64) -> VehicleState {
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

    fn report(vehicles: Vec<VehicleState>) -> TtcReport {
        compute_ttc(&WorldState::from_vehicles(EnvConfig::default(), vehicles, 0).unwrap())
    }

    #[test]
    fn front_vehicle_arithmetic() {
        let r = report(vec![car(0, 1, 0.0, 30.0), car(1, 1, 45.0, 20.0)]);
        assert_eq!(r.entries.len(), 1);
        let e = r.entries[0];
        assert_eq!(e.relation, LaneRelation::Same);
        assert_eq!(e.gap, 40.0);
        assert_eq!(e.ttc, 4.0);
        assert_eq!(e.speed_diff, -10.0);
    }

    #[test]
    fn non_closing_is_infinite() {
        let r = report(vec![car(0, 1, 0.0, 30.0), car(1, 1, 45.0, 30.0), car(2, 2, 20.0, 35.0)]);
        assert!(r.entries.iter().all(|e| e.ttc.is_infinite()));
    }

    #[test]
    fn attention_radius() {
        let r = report(vec![car(0, 1, 0.0, 30.0), car(1, 1, 160.0, 10.0), car(2, 1, 149.0, 10.0)]);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].vehicle_id, 2);
    }

    #[test]
    fn relations_and_rear_threats() {
        let r = report(vec![
            car(0, 1, 0.0, 25.0),
            car(1, 0, -20.0, 35.0),
            car(2, 2, 30.0, 20.0),
            car(3, 3, 10.0, 0.0),
            car(4, 1, -20.0, 40.0),
        ]);
        let left: Vec<_> = r.by_relation(LaneRelation::Left).collect();
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].ttc, 15.0 / 10.0);
        assert!(!left[0].ahead);
        let right: Vec<_> = r.by_relation(LaneRelation::Right).collect();
        assert_eq!(right[0].ttc, 25.0 / 5.0);
        // lane 3 is not adjacent; same-lane rear vehicles never get a finite ttc
        assert!(r.entries.iter().all(|e| e.vehicle_id != 3));
        let same: Vec<_> = r.by_relation(LaneRelation::Same).collect();
        assert!(same[0].ttc.is_infinite());
    }

    #[test]
    fn gap_floor() {
        let r = report(vec![car(0, 1, 0.0, 30.0), car(1, 1, 3.0, 20.0)]);
        assert_eq!(r.entries[0].gap, MIN_GAP);
        assert!((r.entries[0].ttc - 0.01).abs() < 1e-15);
    }
}
