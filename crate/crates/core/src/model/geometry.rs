use serde::{Deserialize, Serialize};

/// Cartesian position in meters: x east, y north, z altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point3(pub [f64; 3]);

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = other.x() - self.x();
        let dy = other.y() - self.y();
        let dz = other.z() - self.z();
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (other.x() - self.x()).hypot(other.y() - self.y())
    }

    /// Point at `fraction` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point3, fraction: f64) -> Point3 {
        Point3([
            self.x() + (other.x() - self.x()) * fraction,
            self.y() + (other.y() - self.y()) * fraction,
            self.z() + (other.z() - self.z()) * fraction,
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Which way a segment is flown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `from` → `to`.
    Forward,
    /// `to` → `from`.
    Reverse,
}

/// One straight piece of a segment polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegProfile {
    pub length: f64,
    /// atan2(Δz, horizontal distance), radians.
    pub climb_angle: f64,
}

impl LegProfile {
    pub fn between(a: &Point3, b: &Point3) -> Self {
        Self {
            length: a.distance(b),
            climb_angle: (b.z() - a.z()).atan2(a.horizontal_distance(b)),
        }
    }
}

/// Legs of a polyline given as an ordered list of points.
pub fn polyline_legs(points: &[Point3]) -> Vec<LegProfile> {
    points
        .windows(2)
        .map(|w| LegProfile::between(&w[0], &w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let leg = LegProfile::between(&Point3::new(0.0, 0.0, 10.0), &Point3::new(40.0, 0.0, 40.0));
        assert_eq!(leg.length, 50.0);
        assert!((leg.climb_angle - 0.6435011087932844).abs() < 1e-12);
    }

    #[test]
    fn lerp_endpoints() {
        let a = Point3::new(1.0, 2.0, 3.0);
        let b = Point3::new(5.0, -2.0, 3.0);
        assert_eq!(a.lerp(&b, 0.0), a);
        assert_eq!(a.lerp(&b, 1.0), b);
        assert_eq!(a.lerp(&b, 0.5), Point3::new(3.0, 0.0, 3.0));
    }
}
