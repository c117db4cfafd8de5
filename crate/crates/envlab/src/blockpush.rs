//! Multimodal block pushing: two square blocks must end up inside two goal
//! squares, in any order and with either goal assignment.

use numkit::Rng;

use crate::body::{resolve_contacts, Body};
use crate::constants::{
    BLOCKPUSH_HORIZON, BLOCK_SIDE, GOAL_CENTERS, GOAL_SIDE, MAX_STEP, PUSHER_RADIUS, WORKSPACE,
};
use crate::env::{EnvSpec, Environment, Scene, StepOutcome};
use crate::geom::{v2, Polygon, Vec2};

pub struct BlockPushEnv {
    spec: EnvSpec,
    pusher: Vec2,
    pub(crate) blocks: [Body; 2],
}

impl BlockPushEnv {
    pub fn new() -> Self {
        BlockPushEnv {
            spec: EnvSpec {
                name: "blockpush".into(),
                state_dim: 22,
                action_dim: 2,
                action_low: vec![-MAX_STEP, -MAX_STEP],
                action_high: vec![MAX_STEP, MAX_STEP],
                horizon: BLOCKPUSH_HORIZON,
                success_desc: "both blocks inside distinct goal squares".into(),
            },
            pusher: v2(0.0, 0.0),
            blocks: [
                Body::square(v2(0.0, 0.0), 0.0, BLOCK_SIDE),
                Body::square(v2(0.0, 0.0), 0.0, BLOCK_SIDE),
            ],
        }
    }

    pub fn pusher(&self) -> Vec2 {
        self.pusher
    }

    pub fn goal_center(i: usize) -> Vec2 {
        v2(GOAL_CENTERS[i][0], GOAL_CENTERS[i][1])
    }

    fn goal_region(i: usize) -> Polygon {
        Polygon::rect(Self::goal_center(i), GOAL_SIDE / 2.0, GOAL_SIDE / 2.0, 0.0)
    }

    pub(crate) fn block_in_goal(&self, block: usize, goal: usize) -> bool {
        Self::goal_region(goal).contains(self.blocks[block].pos)
    }
}

impl Default for BlockPushEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for BlockPushEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed, 0xE1);
        let spawn = |rng: &mut Rng| {
            v2(rng.uniform_in(100.0, WORKSPACE - 100.0), rng.uniform_in(130.0, 260.0))
        };
        loop {
            let a = spawn(&mut rng);
            let b = spawn(&mut rng);
            if (a - b).norm() < 2.6 * BLOCK_SIDE {
                continue;
            }
            let theta_a = rng.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            let theta_b = rng.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            self.blocks = [
                Body::square(a, theta_a, BLOCK_SIDE),
                Body::square(b, theta_b, BLOCK_SIDE),
            ];
            break;
        }
        loop {
            let p = v2(rng.uniform_in(100.0, WORKSPACE - 100.0), rng.uniform_in(50.0, 95.0));
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
        for g in GOAL_CENTERS {
            s.push(g[0]);
            s.push(g[1]);
        }
        s
    }

    fn success(&self) -> bool {
        self.p_metrics()[1]
    }

    fn p_metrics(&self) -> Vec<bool> {
        let a1 = self.block_in_goal(0, 0);
        let a2 = self.block_in_goal(0, 1);
        let b1 = self.block_in_goal(1, 0);
        let b2 = self.block_in_goal(1, 1);
        let p1 = a1 || a2 || b1 || b2;
        let p2 = (a1 && b2) || (a2 && b1);
        vec![p1, p2]
    }

    fn scene(&self) -> Scene {
        Scene {
            pusher: self.pusher,
            pusher_radius: PUSHER_RADIUS,
            bodies: self.blocks.iter().map(|b| b.polygons()).collect(),
            goals: (0..2).map(Self::goal_region).collect(),
        }
    }
}
