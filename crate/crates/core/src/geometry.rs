//! Planar geometry used by the micro-world: points, axis-aligned extents and
//! object footprints.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `deg` degrees, measured from +x towards +y.
    pub fn from_angle_deg(deg: f64) -> Self {
        let r = deg.to_radians();
        Self::new(r.cos(), r.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Rotated +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    /// Rotate about the origin by `deg` degrees.
    pub fn rotate_deg(self, deg: f64) -> Vec2 {
        let (s, c) = deg.to_radians().sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    /// Direction snapped to the nearest of the four axis directions.
    pub fn snap_axis(self) -> Vec2 {
        if self.x.abs() >= self.y.abs() {
            Vec2::new(self.x.signum(), 0.0)
        } else {
            Vec2::new(0.0, self.y.signum())
        }
    }

    pub fn angle_deg(self) -> f64 {
        normalize_deg(self.y.atan2(self.x).to_degrees())
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Map any angle into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Smallest absolute difference between two angles, with the given period
/// (360 for directed angles, 180 for axis-like ones).
pub fn angle_diff_deg(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Axis-aligned world rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Vec2,
    pub max: Vec2,
}

impl Extent {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: Vec2::new(min_x, min_y),
            max: Vec2::new(max_x, max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    pub fn centre(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }
}

/// The whole 1 m x 1 m table seen by the camera.
pub const TABLE: Extent = Extent::new(0.0, 0.0, 1.0, 1.0);
/// Area the arm can reach.
pub const REACH: Extent = Extent::new(0.1, 0.1, 0.9, 0.9);

/// Object outline projected onto the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Disc {
        centre: Vec2,
        radius: f64,
    },
    /// Axis-aligned box given by centre and half extents.
    Box {
        centre: Vec2,
        half: Vec2,
    },
}

impl Footprint {
    pub fn centre(&self) -> Vec2 {
        match *self {
            Footprint::Disc { centre, .. } | Footprint::Box { centre, .. } => centre,
        }
    }

    /// Distance from `p` to the footprint (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        match *self {
            Footprint::Disc { centre, radius } => (p.dist(centre) - radius).max(0.0),
            Footprint::Box { centre, half } => {
                let dx = ((p.x - centre.x).abs() - half.x).max(0.0);
                let dy = ((p.y - centre.y).abs() - half.y).max(0.0);
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Whether the footprint reaches into the open disc `(p, r)`.
    pub fn intersects_disc(&self, p: Vec2, r: f64) -> bool {
        self.distance_to(p) < r
    }

    /// Strict interior overlap; touching outlines do not count.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        const EPS: f64 = 1e-9;
        match (*self, *other) {
            (Footprint::Disc { centre, radius }, o) | (o, Footprint::Disc { centre, radius }) => {
                o.distance_to(centre) < radius - EPS
            }
            (
                Footprint::Box {
                    centre: a,
                    half: ha,
                },
                Footprint::Box {
                    centre: b,
                    half: hb,
                },
            ) => (a.x - b.x).abs() < ha.x + hb.x - EPS && (a.y - b.y).abs() < ha.y + hb.y - EPS,
        }
    }

    pub fn translated(&self, d: Vec2) -> Footprint {
        match *self {
            Footprint::Disc { centre, radius } => Footprint::Disc {
                centre: centre + d,
                radius,
            },
            Footprint::Box { centre, half } => Footprint::Box {
                centre: centre + d,
                half,
            },
        }
    }

    /// Radius of the smallest centred disc containing the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Footprint::Disc { radius, .. } => radius,
            Footprint::Box { half, .. } => half.norm(),
        }
    }
}

/// Oriented rectangle, used for the sweep of a turning block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub centre: Vec2,
    pub angle_deg: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl OrientedRect {
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let d = (p - self.centre).rotate_deg(-self.angle_deg);
        let dx = (d.x.abs() - self.half_len).max(0.0);
        let dy = (d.y.abs() - self.half_wid).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_helpers() {
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert_eq!(normalize_deg(360.0), 0.0);
        assert!((angle_diff_deg(350.0, 10.0, 360.0) - 20.0).abs() < 1e-12);
        assert!((angle_diff_deg(0.0, 180.0, 180.0)).abs() < 1e-12);
        assert!((angle_diff_deg(0.0, 178.0, 180.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_overlap() {
        let a = Footprint::Disc {
            centre: Vec2::new(0.0, 0.0),
            radius: 0.04,
        };
        let b = Footprint::Disc {
            centre: Vec2::new(0.08, 0.0),
            radius: 0.04,
        };
        assert!(!a.overlaps(&b));
        let c = Footprint::Box {
            centre: Vec2::new(0.1, 0.0),
            half: Vec2::new(0.07, 0.035),
        };
        assert!(a.overlaps(&c));
        assert!(b.overlaps(&c));
        assert!((c.distance_to(Vec2::new(0.1, 0.1)) - 0.065).abs() < 1e-12);
    }

    #[test]
    fn rotation_and_snap() {
        let v = Vec2::new(1.0, 0.0).rotate_deg(90.0);
        assert!(v.x.abs() < 1e-12 && (v.y - 1.0).abs() < 1e-12);
        assert_eq!(Vec2::new(-0.3, 0.2).snap_axis(), Vec2::new(-1.0, 0.0));
        assert!((Vec2::new(0.0, -1.0).angle_deg() - 270.0).abs() < 1e-12);
    }
}
