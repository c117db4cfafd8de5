//! Sanity environment: a free pusher must reach a goal point.

use numkit::Rng;

use crate::constants::{MAX_STEP, POINTMASS_GOAL_RADIUS, POINTMASS_HORIZON, PUSHER_RADIUS, WORKSPACE};
use crate::env::{EnvSpec, Environment, Scene, StepOutcome};
use crate::geom::{v2, Polygon, Vec2};

pub struct PointmassEnv {
    spec: EnvSpec,
    pusher: Vec2,
    goal: Vec2,
}

impl PointmassEnv {
    pub fn new() -> Self {
        PointmassEnv {
            spec: EnvSpec {
                name: "pointmass".into(),
                state_dim: 4,
                action_dim: 2,
                action_low: vec![-MAX_STEP, -MAX_STEP],
                action_high: vec![MAX_STEP, MAX_STEP],
                horizon: POINTMASS_HORIZON,
                success_desc: format!("pusher within {POINTMASS_GOAL_RADIUS} units of the goal"),
            },
            pusher: v2(0.0, 0.0),
            goal: v2(0.0, 0.0),
        }
    }

    pub fn pusher(&self) -> Vec2 {
        self.pusher
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }
}

impl Default for PointmassEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointmassEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed, 0xE0);
        let margin = 60.0;
        self.pusher = v2(
            rng.uniform_in(margin, WORKSPACE - margin),
            rng.uniform_in(margin, WORKSPACE - margin),
        );
        // goal sampled a bounded march away so the straight-line oracle
        // finishes well inside the horizon
        loop {
            let angle = rng.uniform_in(0.0, std::f64::consts::TAU);
            let dist = rng.uniform_in(40.0, 96.0);
            let goal = self.pusher + v2(angle.cos(), angle.sin()) * dist;
            if goal.x > margin
                && goal.x < WORKSPACE - margin
                && goal.y > margin
                && goal.y < WORKSPACE - margin
            {
                self.goal = goal;
                break;
            }
        }
        self.state_vec()
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        let delta = v2(action[0], action[1]).capped(MAX_STEP);
        self.pusher = v2(
            (self.pusher.x + delta.x).clamp(PUSHER_RADIUS, WORKSPACE - PUSHER_RADIUS),
            (self.pusher.y + delta.y).clamp(PUSHER_RADIUS, WORKSPACE - PUSHER_RADIUS),
        );
        StepOutcome {
            state: self.state_vec(),
            contacts: Vec::new(),
        }
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.pusher.x, self.pusher.y, self.goal.x, self.goal.y]
    }

    fn success(&self) -> bool {
        (self.pusher - self.goal).norm() <= POINTMASS_GOAL_RADIUS
    }

    fn p_metrics(&self) -> Vec<bool> {
        vec![self.success()]
    }

    fn scene(&self) -> Scene {
        Scene {
            pusher: self.pusher,
            pusher_radius: PUSHER_RADIUS,
            bodies: Vec::new(),
            goals: vec![Polygon::rect(
                self.goal,
                POINTMASS_GOAL_RADIUS,
                POINTMASS_GOAL_RADIUS,
                0.0,
            )],
        }
    }
}
