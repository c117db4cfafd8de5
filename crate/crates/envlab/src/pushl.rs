//! Push-L: two L-shaped blocks must be docked into a 2x3-cell rectangle and
//! pushed to cover the fixed goal rectangle.

use numkit::Rng;

use crate::body::{resolve_contacts, Body};
use crate::constants::{
    L_CELL, MAX_STEP, PUSHER_RADIUS, PUSHL_COVERAGE_THRESHOLD, PUSHL_GOAL_CENTER, PUSHL_HORIZON,
    WORKSPACE,
};
use crate::env::{EnvSpec, Environment, Scene, StepOutcome};
use crate::geom::{v2, Polygon, Vec2};

pub struct PushLEnv {
    spec: EnvSpec,
    pusher: Vec2,
    pub(crate) blocks: [Body; 2],
}

impl PushLEnv {
    pub fn new() -> Self {
        PushLEnv {
            spec: EnvSpec {
                name: "pushl".into(),
                state_dim: 26,
                action_dim: 2,
                action_low: vec![-MAX_STEP, -MAX_STEP],
                action_high: vec![MAX_STEP, MAX_STEP],
                horizon: PUSHL_HORIZON,
                success_desc: format!(
                    "blocks jointly cover at least {:.0}% of the goal rectangle",
                    PUSHL_COVERAGE_THRESHOLD * 100.0
                ),
            },
            pusher: v2(0.0, 0.0),
            blocks: [
                Body::l_tromino(v2(0.0, 0.0), 0.0, L_CELL),
                Body::l_tromino(v2(0.0, 0.0), std::f64::consts::PI, L_CELL),
            ],
        }
    }

    pub fn goal_center() -> Vec2 {
        v2(PUSHL_GOAL_CENTER[0], PUSHL_GOAL_CENTER[1])
    }

    /// Axis-aligned goal rectangle (2 cells wide, 3 cells tall).
    pub fn goal_region() -> Polygon {
        Polygon::rect(Self::goal_center(), L_CELL, 1.5 * L_CELL, 0.0)
    }

    pub fn pusher(&self) -> Vec2 {
        self.pusher
    }

    /// Fraction of the goal rectangle covered by the union of both blocks,
    /// on a deterministic unit grid.
    pub fn goal_coverage(&self) -> f64 {
        let center = Self::goal_center();
        let (w, h) = (2.0 * L_CELL, 3.0 * L_CELL);
        let (nx, ny) = (w as usize, h as usize);
        let polys: Vec<Polygon> = self.blocks.iter().flat_map(|b| b.polygons()).collect();
        let mut hit = 0usize;
        for i in 0..nx {
            for j in 0..ny {
                let p = v2(
                    center.x - w / 2.0 + (i as f64 + 0.5),
                    center.y - h / 2.0 + (j as f64 + 0.5),
                );
                if polys.iter().any(|poly| poly.contains(p)) {
                    hit += 1;
                }
            }
        }
        hit as f64 / (nx * ny) as f64
    }
}

impl Default for PushLEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PushLEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed, 0xE2);
        // one block in each canonical orientation; positions randomized
        let spawn = |rng: &mut Rng| {
            v2(
                rng.uniform_in(110.0, WORKSPACE - 110.0),
                rng.uniform_in(110.0, 300.0),
            )
        };
        loop {
            let a = spawn(&mut rng);
            let b = spawn(&mut rng);
            if (a - b).norm() < 4.5 * L_CELL {
                continue;
            }
            self.blocks = [
                Body::l_tromino(a, 0.0, L_CELL),
                Body::l_tromino(b, std::f64::consts::PI, L_CELL),
            ];
            break;
        }
        loop {
            let p = v2(
                rng.uniform_in(100.0, WORKSPACE - 100.0),
                rng.uniform_in(50.0, 95.0),
            );
            let clear = self
                .blocks
                .iter()
                .all(|b| (b.pos - p).norm() > b.circumradius() + PUSHER_RADIUS + 6.0);
            if clear {
                self.pusher = p;
                break;
            }
        }
        self.state_vec()
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        let delta = v2(action[0], action[1]).capped(MAX_STEP);
        let before = self.pusher;
        self.pusher = v2(
            (self.pusher.x + delta.x).clamp(PUSHER_RADIUS, WORKSPACE - PUSHER_RADIUS),
            (self.pusher.y + delta.y).clamp(PUSHER_RADIUS, WORKSPACE - PUSHER_RADIUS),
        );
        let budget = (self.pusher - before).norm();
        let contacts = resolve_contacts(self.pusher, PUSHER_RADIUS, &mut self.blocks, budget);
        StepOutcome {
            state: self.state_vec(),
            contacts,
        }
    }

    fn state_vec(&self) -> Vec<f64> {
        let mut s = vec![self.pusher.x, self.pusher.y];
        for block in &self.blocks {
            for k in block.keypoints() {
                s.push(k.x);
                s.push(k.y);
            }
        }
        s
    }

    fn success(&self) -> bool {
        self.goal_coverage() >= PUSHL_COVERAGE_THRESHOLD
    }

    fn p_metrics(&self) -> Vec<bool> {
        vec![self.success()]
    }

    fn scene(&self) -> Scene {
        Scene {
            pusher: self.pusher,
            pusher_radius: PUSHER_RADIUS,
            bodies: self.blocks.iter().map(|b| b.polygons()).collect(),
            goals: vec![Self::goal_region()],
        }
    }
}
