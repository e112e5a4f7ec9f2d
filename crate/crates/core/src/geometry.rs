//! Planar geometry shared by the simulator and the threat engine.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Sub};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if a >= PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn from_heading(heading: f64) -> Vec2 {
        Vec2::new(heading.cos(), heading.sin())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

/// Body-aligned rectangle centered on `center`, long axis along `heading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            length,
            width,
        }
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let (s, c) = self.heading.sin_cos();
        (Vec2::new(c, s), Vec2::new(-s, c))
    }

    /// Corners in counter-clockwise order starting at front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let c = self.center;
        [
            c + u.scale(hl) + v.scale(hw),
            c - u.scale(hl) + v.scale(hw),
            c - u.scale(hl) - v.scale(hw),
            c + u.scale(hl) - v.scale(hw),
        ]
    }

    /// Boundary counts as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.length / 2.0 && d.dot(v).abs() <= self.width / 2.0
    }

    /// Separating-axis test; touching rectangles overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let (a0, a1) = self.axes();
        let (b0, b1) = other.axes();
        let ca = self.corners();
        let cb = other.corners();
        for axis in [a0, a1, b0, b1] {
            let (amin, amax) = project(&ca, axis);
            let (bmin, bmax) = project(&cb, axis);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }

    /// Smallest enclosing circle radius around the center.
    pub fn bounding_radius(&self) -> f64 {
        (self.length / 2.0).hypot(self.width / 2.0)
    }
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points
        .iter()
        .map(|p| p.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

/// Even-odd ray casting. Points exactly on an edge may land on either side.
pub fn polygon_contains(polygon: &[Vec2], p: Vec2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Result of projecting a point onto a [`Polyline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub station: f64,
    /// Signed lateral offset, positive to the left of the direction of travel.
    pub offset: f64,
    /// Tangent heading at the foot point.
    pub heading: f64,
}

/// Open polyline with cached cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    stations: Vec<f64>,
}

impl Polyline {
    /// Drops consecutive duplicate points. Returns `None` for fewer than two
    /// distinct points.
    pub fn new(points: impl IntoIterator<Item = Vec2>) -> Option<Self> {
        let mut pts: Vec<Vec2> = Vec::new();
        for p in points {
            if pts.last().is_none_or(|&q| (q - p).norm() > 0.0) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let mut stations = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        stations.push(0.0);
        for w in pts.windows(2) {
            acc += (w[1] - w[0]).norm();
            stations.push(acc);
        }
        Some(Self { points: pts, stations })
    }

    /// Straight ray from `origin` along `heading`, starting `behind` meters
    /// before the origin.
    pub fn ray(origin: Vec2, heading: f64, behind: f64, ahead: f64) -> Self {
        let dir = Vec2::from_heading(heading);
        Self::new([origin - dir.scale(behind), origin + dir.scale(ahead)]).expect("ray with positive length")
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().unwrap_or(&0.0)
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best: Option<(f64, Projection)> = None;
        let last = self.points.len() - 2;
        for (i, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let seg = b - a;
            let len = seg.norm();
            let dir = seg.scale(1.0 / len);
            let rel = p - a;
            let mut along = rel.dot(dir);
            // The first and last segments extend to infinity.
            if i > 0 {
                along = along.max(0.0);
            }
            if i < last {
                along = along.min(len);
            }
            let foot = a + dir.scale(along);
            let dist = (p - foot).norm();
            let offset = dir.cross(rel);
            let candidate = Projection {
                station: self.stations[i] + along,
                offset,
                heading: dir.y.atan2(dir.x),
            };
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, candidate));
            }
        }
        best.expect("polyline has a segment").1
    }

    /// Distance from `p` to the nearest point of the polyline (segments clamped).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let seg = b - a;
                let t = ((p - a).dot(seg) / seg.dot(seg)).clamp(0.0, 1.0);
                (p - (a + seg.scale(t))).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Point at arc length `station`, extrapolating past either end.
    pub fn point_at(&self, station: f64) -> Vec2 {
        let n = self.points.len();
        let i = match self.stations.iter().position(|&s| s > station) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        let seg = b - a;
        let len = seg.norm();
        a + seg.scale((station - self.stations[i]) / len)
    }
}
