use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    /// Lane the vehicle center currently sits in.
    pub lane_index: usize,
    /// Lane the lateral controller is steering toward.
    pub target_lane: usize,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    /// Ego: commanded speed. Npc: IDM desired speed.
    pub target_speed: f64,
    pub crashed: bool,
    pub is_ego: bool,
}

impl VehicleState {
    pub fn vx(&self) -> f64 {
        self.speed * self.heading.cos()
    }

    pub fn vy(&self) -> f64 {
        self.speed * self.heading.sin()
    }

    /// Whether the vehicle occupies (or is moving into) `lane`.
    pub fn in_lane(&self, lane: usize) -> bool {
        self.lane_index == lane || self.target_lane == lane
    }
}

/// Discrete meta-actions of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    LaneLeft,
    Idle,
    LaneRight,
    Faster,
    Slower,
}

impl MetaAction {
    pub const ALL: [MetaAction; 5] = [
        MetaAction::LaneLeft,
        MetaAction::Idle,
        MetaAction::LaneRight,
        MetaAction::Faster,
        MetaAction::Slower,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        match self {
            MetaAction::LaneLeft => 0,
            MetaAction::Idle => 1,
            MetaAction::LaneRight => 2,
            MetaAction::Faster => 3,
            MetaAction::Slower => 4,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaAction::LaneLeft => "LANE_LEFT",
            MetaAction::Idle => "IDLE",
            MetaAction::LaneRight => "LANE_RIGHT",
            MetaAction::Faster => "FASTER",
            MetaAction::Slower => "SLOWER",
        }
    }
}

/// Lateral direction; left means decreasing lane index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChange {
    Left,
    Right,
}

impl LaneChange {
    pub fn apply(self, lane: usize, lane_count: usize) -> Option<usize> {
        match self {
            LaneChange::Left => lane.checked_sub(1),
            LaneChange::Right => (lane + 1 < lane_count).then_some(lane + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_indices_round_trip() {
        for (i, a) in MetaAction::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(MetaAction::from_index(i), Some(*a));
        }
        assert_eq!(MetaAction::from_index(5), None);
    }

    #[test]
    fn lane_change_stays_on_road() {
        assert_eq!(LaneChange::Left.apply(0, 4), None);
        assert_eq!(LaneChange::Left.apply(2, 4), Some(1));
        assert_eq!(LaneChange::Right.apply(3, 4), None);
        assert_eq!(LaneChange::Right.apply(1, 4), Some(2));
    }
}
