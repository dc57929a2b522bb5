//! Planar geometry helpers shared by the scene, graph and heatmap modules.
//!
//! Angles follow the robot convention used throughout the crate: measured
//! counterclockwise from the +y (forward) axis, so a heading `theta` points
//! along `(-sin theta, cos theta)`.

use std::f64::consts::{PI, TAU};

pub type Point = [f64; 2];

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Unit direction of a heading angle.
pub fn heading_vector(theta: f64) -> Point {
    [-theta.sin(), theta.cos()]
}

/// Heading angle of a direction vector (inverse of [`heading_vector`]).
pub fn heading_of(direction: Point) -> f64 {
    (-direction[0]).atan2(direction[1])
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn midpoint(a: Point, b: Point) -> Point {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

/// A rigid frame attached to the robot: y forward, x to the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotFrame {
    origin: Point,
    theta: f64,
    cos: f64,
    sin: f64,
}

impl RobotFrame {
    pub fn new(origin: Point, theta: f64) -> Self {
        Self {
            origin,
            theta,
            cos: theta.cos(),
            sin: theta.sin(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// World point expressed in the robot frame.
    pub fn point(&self, p: Point) -> Point {
        self.vector([p[0] - self.origin[0], p[1] - self.origin[1]])
    }

    /// World vector (velocity, direction) rotated into the robot frame.
    pub fn vector(&self, v: Point) -> Point {
        [
            v[0] * self.cos + v[1] * self.sin,
            -v[0] * self.sin + v[1] * self.cos,
        ]
    }

    pub fn angle(&self, theta: f64) -> f64 {
        wrap_angle(theta - self.theta)
    }
}

/// Signed area of a closed polygon given by its vertices (CCW positive).
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc * 0.5
}

/// Area centroid of a simple polygon. Falls back to the vertex mean when the
/// polygon is degenerate.
pub fn polygon_centroid(vertices: &[Point]) -> Point {
    let n = vertices.len();
    if n == 0 {
        return [0.0, 0.0];
    }
    let area = signed_area(vertices);
    if area.abs() < 1e-12 {
        let (sx, sy) = vertices
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        return [sx / n as f64, sy / n as f64];
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let cross = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * cross;
        cy += (a[1] + b[1]) * cross;
    }
    [cx / (6.0 * area), cy / (6.0 * area)]
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return distance(p, a);
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    distance(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Point-in-polygon test; points on the boundary (within `1e-9`) count as inside.
pub fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if point_segment_distance(p, vertices[i], vertices[(i + 1) % n]) <= 1e-9 {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (vertices[i], vertices[j]);
        if (vi[1] > p[1]) != (vj[1] > p[1]) {
            let x = vj[0] + (p[1] - vj[1]) * (vi[0] - vj[0]) / (vi[1] - vj[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Axis-aligned bounding box `(min, max)` of a point set.
pub fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn robot_frame_forward_is_y() {
        // robot at (1, 1) facing world -x (theta = pi/2)
        let frame = RobotFrame::new([1.0, 1.0], PI / 2.0);
        let p = frame.point([-1.0, 1.0]);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 2.0, epsilon = 1e-12);
        let right = frame.point([1.0, 2.0]);
        assert_abs_diff_eq!(right[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(right[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn heading_round_trip() {
        for &t in &[0.0, 0.3, -2.0, PI] {
            assert_abs_diff_eq!(heading_of(heading_vector(t)), t, epsilon = 1e-12);
        }
    }

    #[test]
    fn centroid_of_l_shape() {
        // 2x2 square minus the top-right unit square
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let c = polygon_centroid(&l);
        assert_abs_diff_eq!(c[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 5.0 / 6.0, epsilon = 1e-12);
        assert!(point_in_polygon([0.5, 1.5], &l));
        assert!(!point_in_polygon([1.5, 1.5], &l));
        assert!(point_in_polygon([2.0, 0.5], &l));
    }
}
