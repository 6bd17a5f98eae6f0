//! Oriented-rectangle overlap via the separating axis theorem.

use super::VehicleState;

/// Footprint of a vehicle: center, heading and full extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn of(v: &VehicleState, length: f64, width: f64) -> Self {
        Self { x: v.x, y: v.y, heading: v.heading, length, width }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)].map(|(a, b)| {
            (self.x + a * hl * ux + b * hw * vx, self.y + a * hl * uy + b * hw * vy)
        })
    }

    /// Point containment (closed rectangle).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let dx = px - self.x;
        let dy = py - self.y;
        (dx * ux + dy * uy).abs() <= self.length / 2.0 && (dx * vx + dy * vy).abs() <= self.width / 2.0
    }

    fn project(&self, axis: (f64, f64)) -> (f64, f64) {
        self.corners().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
            let p = x * axis.0 + y * axis.1;
            (lo.min(p), hi.max(p))
        })
    }

    /// True iff the interiors overlap.
    pub fn intersects(&self, other: &Footprint) -> bool {
        self.axes().into_iter().chain(other.axes()).all(|axis| {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            a0 < b1 && b0 < a1
        })
    }
}

pub fn check_collision(a: &VehicleState, b: &VehicleState, length: f64, width: f64) -> bool {
    // cheap reject before the full test
    let reach = (length * length + width * width).sqrt();
    if (a.x - b.x).abs() > reach || (a.y - b.y).abs() > reach {
        return false;
    }
    Footprint::of(a, length, width).intersects(&Footprint::of(b, length, width))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(x: f64, y: f64, heading: f64) -> Footprint {
        Footprint { x, y, heading, length: 5.0, width: 2.0 }
    }

    #[test]
    fn identical_pose_collides() {
        assert!(fp(3.0, 1.0, 0.2).intersects(&fp(3.0, 1.0, 0.2)));
    }

    #[test]
    fn separated_in_lane() {
        assert!(!fp(0.0, 0.0, 0.0).intersects(&fp(10.0, 0.0, 0.0)));
        assert!(fp(0.0, 0.0, 0.0).intersects(&fp(4.9, 0.0, 0.0)));
        // side by side in adjacent lanes
        assert!(!fp(0.0, 0.0, 0.0).intersects(&fp(0.0, 4.0, 0.0)));
    }

    #[test]
    fn rotated_corner_case() {
        // diagonal gap that an axis-aligned bounding box test would miss
        let a = fp(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let b = fp(3.2, -3.2, std::f64::consts::FRAC_PI_4);
        assert!(!a.intersects(&b));
    }
}
