//! Small planar geometry primitives used by the problem description.

use serde::{Deserialize, Serialize};

/// Point in the cavity plane, `(x1, x2)`.
pub type Point = [f64; 2];

/// Axis-aligned rectangle given by its extreme coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn from_corners(a: Point, b: Point) -> Self {
        Rect {
            x_lo: a[0].min(b[0]),
            x_hi: a[0].max(b[0]),
            y_lo: a[1].min(b[1]),
            y_hi: a[1].max(b[1]),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_lo && p[0] <= self.x_hi && p[1] >= self.y_lo && p[1] <= self.y_hi
    }

    /// Contains `other` entirely (with a tolerance slack on each side).
    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x_lo >= self.x_lo - tol
            && other.x_hi <= self.x_hi + tol
            && other.y_lo >= self.y_lo - tol
            && other.y_hi <= self.y_hi + tol
    }

    /// Signed penetration depth of a disk into this rectangle.
    ///
    /// Positive means the disk overlaps the rectangle by that depth;
    /// negative is the clearance between them.
    pub fn disk_penetration(&self, center: Point, radius: f64) -> f64 {
        let cx = center[0].clamp(self.x_lo, self.x_hi);
        let cy = center[1].clamp(self.y_lo, self.y_hi);
        let d = ((center[0] - cx).powi(2) + (center[1] - cy).powi(2)).sqrt();
        radius - d
    }
}

/// Circular inclusion with a material region label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub center: Point,
    pub radius: f64,
    pub region_id: u32,
}

impl Inclusion {
    pub fn contains(&self, p: Point) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}
