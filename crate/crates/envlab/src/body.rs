//! Rigid bodies (squares and L-trominoes) and the quasi-static contact
//! resolution shared by the pushing environments.

use crate::constants::{ROTATION_GAIN, WORKSPACE};
use crate::geom::{disk_polygon_overlap, polygon_overlap, v2, Polygon, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyShape {
    Square { half: f64 },
    /// Three `cell x cell` squares in an L: cells (0,0), (1,0), (0,1) of the
    /// body grid, with the pose anchored at the tromino centroid.
    LTromino { cell: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Body {
    pub pos: Vec2,
    pub theta: f64,
    pub shape: BodyShape,
}

impl Body {
    pub fn square(pos: Vec2, theta: f64, side: f64) -> Body {
        Body {
            pos,
            theta,
            shape: BodyShape::Square { half: side / 2.0 },
        }
    }

    pub fn l_tromino(pos: Vec2, theta: f64, cell: f64) -> Body {
        Body {
            pos,
            theta,
            shape: BodyShape::LTromino { cell },
        }
    }

    /// Centroid offset of the L outline from its (0,0) grid corner.
    fn l_centroid(cell: f64) -> Vec2 {
        v2(2.5 * cell / 3.0, 2.5 * cell / 3.0)
    }

    /// Convex parts in world coordinates.
    pub fn polygons(&self) -> Vec<Polygon> {
        match self.shape {
            BodyShape::Square { half } => vec![Polygon::rect(self.pos, half, half, self.theta)],
            BodyShape::LTromino { cell } => {
                let c = Self::l_centroid(cell);
                // bottom bar (2 cells wide) and the upper cell, in body frame
                let parts = [
                    (v2(cell, 0.5 * cell) - c, cell, 0.5 * cell),
                    (v2(0.5 * cell, 1.5 * cell) - c, 0.5 * cell, 0.5 * cell),
                ];
                parts
                    .iter()
                    .map(|(center, hw, hh)| {
                        Polygon::rect(self.pos + center.rotated(self.theta), *hw, *hh, self.theta)
                    })
                    .collect()
            }
        }
    }

    /// Corner keypoints in world coordinates: 4 for a square, the 6 outline
    /// corners for an L.
    pub fn keypoints(&self) -> Vec<Vec2> {
        let local: Vec<Vec2> = match self.shape {
            BodyShape::Square { half } => {
                vec![v2(-half, -half), v2(half, -half), v2(half, half), v2(-half, half)]
            }
            BodyShape::LTromino { cell } => {
                let c = Self::l_centroid(cell);
                [
                    v2(0.0, 0.0),
                    v2(2.0 * cell, 0.0),
                    v2(2.0 * cell, cell),
                    v2(cell, cell),
                    v2(cell, 2.0 * cell),
                    v2(0.0, 2.0 * cell),
                ]
                .iter()
                .map(|p| *p - c)
                .collect()
            }
        };
        local
            .iter()
            .map(|p| self.pos + p.rotated(self.theta))
            .collect()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.polygons().iter().any(|poly| poly.contains(p))
    }

    /// Radius of the smallest centered circle containing the body.
    pub fn circumradius(&self) -> f64 {
        self.keypoints()
            .iter()
            .map(|k| (*k - self.pos).norm())
            .fold(0.0, f64::max)
    }

    /// Characteristic side length for the rotation gain.
    pub fn side_length(&self) -> f64 {
        match self.shape {
            BodyShape::Square { half } => 2.0 * half,
            BodyShape::LTromino { cell } => cell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactKind {
    PusherBlock(usize),
    BlockBlock(usize, usize),
}

#[derive(Debug, Clone, Copy)]
pub struct ContactEvent {
    pub kind: ContactKind,
    pub depth: f64,
}

/// Resolves pusher-block and block-block overlaps.
///
/// Pusher contact translates the block by the penetration-resolving vector
/// and rotates it about its center by `cross(normalize(lever), t) *
/// ROTATION_GAIN / side_length`. Block-block overlap separates both bodies
/// symmetrically, translation only. Every body's total translation in one
/// call is capped at `budget` (the pusher's step magnitude), and keypoints
/// are clamped into the workspace afterwards.
pub fn resolve_contacts(
    pusher: Vec2,
    pusher_radius: f64,
    bodies: &mut [Body],
    budget: f64,
) -> Vec<ContactEvent> {
    let mut events = Vec::new();
    let start: Vec<Vec2> = bodies.iter().map(|b| b.pos).collect();
    let remaining = |bodies: &[Body], i: usize, start: &[Vec2]| -> f64 {
        (budget - (bodies[i].pos - start[i]).norm()).max(0.0)
    };

    for _pass in 0..3 {
        let mut any = false;
        for i in 0..bodies.len() {
            let deepest = bodies[i]
                .polygons()
                .iter()
                .filter_map(|poly| disk_polygon_overlap(pusher, pusher_radius, poly))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((depth, normal, contact)) = deepest {
                if depth < 1e-9 {
                    continue;
                }
                let t = (normal * depth).capped(remaining(bodies, i, &start));
                if t.norm() > 1e-12 {
                    let lever = (contact - bodies[i].pos).normalized_or_zero();
                    bodies[i].pos = bodies[i].pos + t;
                    bodies[i].theta += ROTATION_GAIN * lever.cross(t) / bodies[i].side_length();
                    any = true;
                }
                events.push(ContactEvent {
                    kind: ContactKind::PusherBlock(i),
                    depth,
                });
            }
        }
        for i in 0..bodies.len() {
            for j in i + 1..bodies.len() {
                let mut deepest: Option<(f64, Vec2)> = None;
                for pa in bodies[i].polygons() {
                    for pb in bodies[j].polygons() {
                        if let Some((depth, axis)) = polygon_overlap(&pa, &pb) {
                            if deepest.map_or(true, |d| depth > d.0) {
                                deepest = Some((depth, axis));
                            }
                        }
                    }
                }
                if let Some((depth, axis)) = deepest {
                    if depth < 1e-9 {
                        continue;
                    }
                    let ti = (axis * (-depth * 0.5)).capped(remaining(bodies, i, &start));
                    let tj = (axis * (depth * 0.5)).capped(remaining(bodies, j, &start));
                    if ti.norm() + tj.norm() > 1e-12 {
                        bodies[i].pos = bodies[i].pos + ti;
                        bodies[j].pos = bodies[j].pos + tj;
                        any = true;
                    }
                    events.push(ContactEvent {
                        kind: ContactKind::BlockBlock(i, j),
                        depth,
                    });
                }
            }
        }
        if !any {
            break;
        }
    }

    for (i, body) in bodies.iter_mut().enumerate() {
        let net = body.pos - start[i];
        if net.norm() > budget {
            body.pos = start[i] + net.capped(budget);
        }
        clamp_into_workspace(body);
    }
    events
}

/// Shifts a body the minimal amount so every keypoint lies in the workspace.
pub fn clamp_into_workspace(body: &mut Body) {
    let mut shift = v2(0.0, 0.0);
    for k in body.keypoints() {
        if k.x < 0.0 {
            shift.x = shift.x.max(-k.x);
        }
        if k.x > WORKSPACE {
            shift.x = shift.x.min(WORKSPACE - k.x);
        }
        if k.y < 0.0 {
            shift.y = shift.y.max(-k.y);
        }
        if k.y > WORKSPACE {
            shift.y = shift.y.min(WORKSPACE - k.y);
        }
    }
    body.pos = body.pos + shift;
}
