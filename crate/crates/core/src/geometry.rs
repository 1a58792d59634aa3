//! Planar geometry used by the channel sampler: points, polygon centroids
//! and rotations about a pivot.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Signed shoelace area of a ring (positive for counter-clockwise rings).
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Arithmetic mean of the vertices.
pub fn vertex_mean(ring: &[Point]) -> Point {
    let n = ring.len() as f64;
    let (sx, sy) = ring.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Area-weighted centroid of a simple polygon ring.
///
/// Vertices are taken relative to the first vertex before accumulating so
/// the result does not lose precision for rings far from the origin.
/// Degenerate (zero-area) rings fall back to the vertex mean.
pub fn polygon_centroid(ring: &[Point]) -> Point {
    if ring.is_empty() {
        return Point::new(f64::NAN, f64::NAN);
    }
    let origin = ring[0];
    let n = ring.len();
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let (ax, ay) = (a.x - origin.x, a.y - origin.y);
        let (bx, by) = (b.x - origin.x, b.y - origin.y);
        let cross = ax * by - bx * ay;
        area2 += cross;
        cx += (ax + bx) * cross;
        cy += (ay + by) * cross;
    }
    let scale = ring
        .iter()
        .map(|p| (p.x - origin.x).abs().max((p.y - origin.y).abs()))
        .fold(0.0_f64, f64::max);
    if area2.abs() <= 1e-14 * scale * scale {
        return vertex_mean(ring);
    }
    Point::new(origin.x + cx / (3.0 * area2), origin.y + cy / (3.0 * area2))
}

/// Rotation by a fixed angle about a pivot, returning coordinates relative
/// to the pivot (the pivot is not added back).
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    pivot: Point,
    cos: f64,
    sin: f64,
}

impl Rotation {
    /// Counter-clockwise rotation by `degrees`.
    pub fn new(pivot: Point, degrees: f64) -> Self {
        let rad = degrees.to_radians();
        // exact values at the quarter turns keep lattices on their lattice
        let (sin, cos) = if degrees == 0.0 {
            (0.0, 1.0)
        } else if degrees == 90.0 {
            (1.0, 0.0)
        } else if degrees == -90.0 {
            (-1.0, 0.0)
        } else if degrees.abs() == 180.0 {
            (0.0, -1.0)
        } else {
            rad.sin_cos()
        };
        Rotation { pivot, cos, sin }
    }

    pub fn apply(&self, p: Point) -> Point {
        let dx = p.x - self.pivot.x;
        let dy = p.y - self.pivot.y;
        Point::new(dx * self.cos - dy * self.sin, dx * self.sin + dy * self.cos)
    }

    /// Maps a pivot-relative point back to absolute coordinates.
    pub fn invert(&self, p: Point) -> Point {
        let x = p.x * self.cos + p.y * self.sin;
        let y = -p.x * self.sin + p.y * self.cos;
        Point::new(x + self.pivot.x, y + self.pivot.y)
    }
}
