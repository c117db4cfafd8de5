//! Minimal 2-D geometry: vectors, convex polygons, and the overlap tests the
//! quasi-static contact model needs.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub fn v2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized_or_zero(self) -> Vec2 {
        let n = self.norm();
        if n > 1e-12 {
            v2(self.x / n, self.y / n)
        } else {
            v2(0.0, 0.0)
        }
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        v2(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn perp(self) -> Vec2 {
        v2(-self.y, self.x)
    }

    /// Clamps the norm to at most `max`.
    pub fn capped(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        v2(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        v2(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        v2(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        v2(-self.x, -self.y)
    }
}

/// Convex polygon, counter-clockwise corners in world coordinates.
#[derive(Debug, Clone)]
pub struct Polygon {
    pub corners: Vec<Vec2>,
}

impl Polygon {
    /// Axis-aligned rectangle from center and half extents, then rotated.
    pub fn rect(center: Vec2, half_w: f64, half_h: f64, theta: f64) -> Polygon {
        let local = [
            v2(-half_w, -half_h),
            v2(half_w, -half_h),
            v2(half_w, half_h),
            v2(-half_w, half_h),
        ];
        Polygon {
            corners: local.iter().map(|p| center + p.rotated(theta)).collect(),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.corners.len();
        for i in 0..n {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % n];
            if (b - a).cross(p - a) < 0.0 {
                return false;
            }
        }
        true
    }

    /// Closest point on the polygon boundary to `p`.
    pub fn closest_boundary_point(&self, p: Vec2) -> Vec2 {
        let n = self.corners.len();
        let mut best = self.corners[0];
        let mut best_d2 = f64::INFINITY;
        for i in 0..n {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % n];
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            let q = a + ab * t;
            let d2 = (p - q).dot(p - q);
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
        best
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.corners {
            let v = c.dot(axis);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn centroid_of_corners(&self) -> Vec2 {
        let mut acc = v2(0.0, 0.0);
        for c in &self.corners {
            acc = acc + *c;
        }
        acc * (1.0 / self.corners.len() as f64)
    }
}

/// Distance along `dir` (unit) from `origin` to the polygon boundary.
///
/// Returns the smallest positive crossing parameter, if the ray meets the
/// polygon at all.
pub fn ray_boundary_distance(poly: &Polygon, origin: Vec2, dir: Vec2) -> Option<f64> {
    let n = poly.corners.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let a = poly.corners[i];
        let b = poly.corners[(i + 1) % n];
        let e = b - a;
        let denom = dir.cross(e);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (a - origin).cross(e) / denom;
        let s = (a - origin).cross(dir) / denom;
        if t > 1e-9 && (-1e-9..=1.0 + 1e-9).contains(&s) && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// Disk-vs-convex-polygon overlap.
///
/// Returns `(depth, normal, contact)` where moving the polygon by
/// `normal * depth` resolves the contact; `contact` is the boundary point
/// nearest the disk center (the lever-arm anchor).
pub fn disk_polygon_overlap(center: Vec2, radius: f64, poly: &Polygon) -> Option<(f64, Vec2, Vec2)> {
    let closest = poly.closest_boundary_point(center);
    let delta = closest - center;
    let dist = delta.norm();
    if poly.contains(center) {
        // disk center swallowed: push the polygon out past the nearest edge
        let depth = radius + dist;
        let normal = (-delta).normalized_or_zero();
        let normal = if normal.norm() == 0.0 { v2(1.0, 0.0) } else { normal };
        Some((depth, -normal, closest))
    } else if dist < radius {
        let normal = delta.normalized_or_zero();
        Some((radius - dist, normal, closest))
    } else {
        None
    }
}

/// Separating-axis test between two convex polygons.
///
/// Returns `(depth, axis)`: translating `b` by `axis * depth` separates
/// them (the axis points from `a` toward `b`).
pub fn polygon_overlap(a: &Polygon, b: &Polygon) -> Option<(f64, Vec2)> {
    let mut min_depth = f64::INFINITY;
    let mut min_axis = v2(0.0, 0.0);
    for poly in [a, b] {
        let n = poly.corners.len();
        for i in 0..n {
            let edge = poly.corners[(i + 1) % n] - poly.corners[i];
            let axis = edge.perp().normalized_or_zero();
            if axis.norm() == 0.0 {
                continue;
            }
            let (alo, ahi) = a.project(axis);
            let (blo, bhi) = b.project(axis);
            let overlap = ahi.min(bhi) - alo.max(blo);
            if overlap <= 0.0 {
                return None;
            }
            if overlap < min_depth {
                min_depth = overlap;
                min_axis = axis;
            }
        }
    }
    // orient the axis from a toward b
    let dir = b.centroid_of_corners() - a.centroid_of_corners();
    if dir.dot(min_axis) < 0.0 {
        min_axis = -min_axis;
    }
    Some((min_depth, min_axis))
}
