//! Scripted demonstration oracles: waypoint-following controllers that solve
//! each task from privileged pose access, used to generate training data.
//!
//! The block-pushing oracles pick their block order and goal assignment at
//! random, so the recorded datasets are multimodal. Failed attempts are
//! discarded and resampled.

use std::collections::BTreeMap;

use numkit::Rng;

use crate::blockpush::BlockPushEnv;
use crate::body::Body;
use crate::constants::{L_CELL, MAX_STEP, PUSHER_RADIUS};
use crate::dataset::{Dataset, Episode};
use crate::env::Environment;
use crate::geom::{ray_boundary_distance, v2, Vec2};
use crate::pointmass::PointmassEnv;
use crate::pushl::PushLEnv;
use crate::{EnvError, Result};

/// How deep the pusher aims into the contact while pushing.
const PUSH_BITE: f64 = 2.5;
/// Extra clearance around obstacles during free navigation.
const NAV_MARGIN: f64 = 4.0;
/// Clearance of the staging waypoint behind a block.
const STAGE_CLEARANCE: f64 = 14.0;

/// One navigation step toward `target`, walking tangentially around any
/// circular obstacle that blocks the straight segment.
fn navigate(pusher: Vec2, target: Vec2, obstacles: &[(Vec2, f64)]) -> Vec2 {
    let to_t = target - pusher;
    let seg = to_t.norm();
    if seg < 1e-9 {
        return v2(0.0, 0.0);
    }
    let dir = to_t * (1.0 / seg);
    for (c, r) in obstacles {
        let to_c = *c - pusher;
        let d = to_c.norm();
        let side = if to_c.cross(to_t) >= 0.0 { 1.0 } else { -1.0 };
        let tangent = to_c.perp().normalized_or_zero() * side;
        if d < *r {
            // inside the inflated region: drift out while circling on
            let out = (-to_c).normalized_or_zero();
            return (out * 0.7 + tangent).normalized_or_zero() * MAX_STEP;
        }
        let proj = to_c.dot(dir);
        if proj > 0.0 && proj < seg {
            let closest2 = d * d - proj * proj;
            if closest2 < r * r {
                let out = (-to_c).normalized_or_zero();
                return (tangent + out * 0.3).normalized_or_zero() * MAX_STEP;
            }
        }
    }
    to_t.capped(MAX_STEP)
}

/// Distance from a body's center to its boundary along `dir`.
fn exit_distance(body: &Body, dir: Vec2) -> f64 {
    body.polygons()
        .iter()
        .filter_map(|p| ray_boundary_distance(p, body.pos, dir))
        .fold(0.0, f64::max)
        .max(body.side_length() * 0.5)
}

/// Drive the pusher behind `body` (relative to `push_dir`) and bite into the
/// contact through the body center. Far from the block the pusher heads for
/// a staging point outside the block's navigation circle, deflecting around
/// obstacles; once roughly on the push axis it closes in directly.
fn push_step(pusher: Vec2, body: &Body, push_dir: Vec2, obstacles: &[(Vec2, f64)]) -> Vec2 {
    let reach = body.circumradius() + PUSHER_RADIUS;
    let rel = pusher - body.pos;
    let aligned = rel.normalized_or_zero().dot(-push_dir) > 0.9;
    if aligned && rel.norm() < reach + STAGE_CLEARANCE + 3.0 {
        let standoff = exit_distance(body, -push_dir) + PUSHER_RADIUS;
        let target = body.pos - push_dir * (standoff - PUSH_BITE);
        return (target - pusher).capped(MAX_STEP);
    }
    let stage = body.pos - push_dir * (reach + STAGE_CLEARANCE);
    navigate(pusher, stage, obstacles)
}

// ---------------------------------------------------------------------------
// point mass

fn pointmass_action(env: &PointmassEnv) -> Vec2 {
    (env.goal() - env.pusher()).capped(MAX_STEP)
}

// ---------------------------------------------------------------------------
// block push

struct BlockPushOracle {
    /// (block, goal) tasks in execution order.
    tasks: [(usize, usize); 2],
    pub mode: String,
}

impl BlockPushOracle {
    fn new(rng: &mut Rng) -> Self {
        let first_block = rng.below(2);
        let first_goal = rng.below(2);
        let tasks = [
            (first_block, first_goal),
            (1 - first_block, 1 - first_goal),
        ];
        let mode = format!(
            "b{}g{}_b{}g{}",
            tasks[0].0, tasks[0].1, tasks[1].0, tasks[1].1
        );
        BlockPushOracle { tasks, mode }
    }

    fn action(&self, env: &BlockPushEnv) -> Vec2 {
        for &(block_i, goal_i) in &self.tasks {
            if env.block_in_goal(block_i, goal_i) {
                continue;
            }
            let block = &env.blocks[block_i];
            let goal = BlockPushEnv::goal_center(goal_i);
            let push_dir = (goal - block.pos).normalized_or_zero();
            let other = &env.blocks[1 - block_i];
            let obstacles = [
                (other.pos, other.circumradius() + PUSHER_RADIUS + NAV_MARGIN),
                (block.pos, block.circumradius() + PUSHER_RADIUS + NAV_MARGIN),
            ];
            return push_step(env.pusher(), block, push_dir, &obstacles);
        }
        v2(0.0, 0.0)
    }
}

// ---------------------------------------------------------------------------
// push-L

/// Cell-frame centroid offset between the rotated and base tromino of a
/// docked 2x3 rectangle.
fn dock_offset() -> Vec2 {
    v2(L_CELL / 3.0, 4.0 * L_CELL / 3.0)
}

struct PushLOracle {
    mover: usize,
    docked: bool,
    pub mode: String,
}

impl PushLOracle {
    fn new(rng: &mut Rng) -> Self {
        let mover = rng.below(2);
        PushLOracle {
            mover,
            docked: false,
            mode: format!("mover{mover}"),
        }
    }

    /// Target centroid position docking the mover against the stationary
    /// block. Blocks[0] has the base orientation, blocks[1] the rotated one.
    fn dock_target(&self, env: &PushLEnv) -> Vec2 {
        let stationary = &env.blocks[1 - self.mover];
        if self.mover == 1 {
            // mover takes the rotated role relative to the base block
            stationary.pos + dock_offset().rotated(stationary.theta)
        } else {
            // stationary is the rotated block; undo the offset in the base
            // frame (base theta = stationary theta - pi)
            stationary.pos - dock_offset().rotated(stationary.theta - std::f64::consts::PI)
        }
    }

    fn action(&mut self, env: &PushLEnv) -> Vec2 {
        let mover = &env.blocks[self.mover];
        let stationary = &env.blocks[1 - self.mover];
        let dock = self.dock_target(env);
        let dock_err = (mover.pos - dock).norm();
        // hysteresis so contact jitter does not flap between phases
        if self.docked && dock_err > 7.0 {
            self.docked = false;
        } else if !self.docked && dock_err < 2.5 {
            self.docked = true;
        }

        if !self.docked {
            let push_dir = (dock - mover.pos).normalized_or_zero();
            let obstacles = [
                (
                    stationary.pos,
                    stationary.circumradius() + PUSHER_RADIUS + NAV_MARGIN,
                ),
                (mover.pos, mover.circumradius() + PUSHER_RADIUS + NAV_MARGIN),
            ];
            return push_step(env.pusher(), mover, push_dir, &obstacles);
        }

        // transport the docked pair with edge-aligned pushes along the
        // rectangle axes, larger residual first
        let base_theta = if self.mover == 1 {
            stationary.theta
        } else {
            stationary.theta - std::f64::consts::PI
        };
        let pair_center = (env.blocks[0].pos + env.blocks[1].pos) * 0.5;
        let delta = PushLEnv::goal_center() - pair_center;
        let local = delta.rotated(-base_theta);
        let (axis_local, residual, half_extent) = if local.x.abs() >= local.y.abs() {
            (v2(local.x.signum(), 0.0), local.x.abs(), L_CELL)
        } else {
            (v2(0.0, local.y.signum()), local.y.abs(), 1.5 * L_CELL)
        };
        if residual < 1.5 {
            return v2(0.0, 0.0);
        }
        let push_dir = axis_local.rotated(base_theta);
        let reach = 1.9 * L_CELL + PUSHER_RADIUS;
        let rel = env.pusher() - pair_center;
        let aligned = rel.normalized_or_zero().dot(-push_dir) > 0.92
            && rel.norm() < reach + STAGE_CLEARANCE + 3.0;
        if aligned {
            let target = pair_center - push_dir * (half_extent + PUSHER_RADIUS - PUSH_BITE);
            (target - env.pusher()).capped(MAX_STEP)
        } else {
            let stage = pair_center - push_dir * (reach + STAGE_CLEARANCE);
            let obstacles = [(pair_center, reach + NAV_MARGIN)];
            navigate(env.pusher(), stage, &obstacles)
        }
    }
}

// ---------------------------------------------------------------------------
// demo generation

struct RecordedRun {
    states: Vec<f64>,
    actions: Vec<f64>,
    t_len: usize,
    success: bool,
}

fn run_episode<E: Environment>(
    env: &mut E,
    mut policy: impl FnMut(&E) -> Vec2,
    seed: u64,
) -> RecordedRun {
    let horizon = env.spec().horizon;
    let mut states = env.reset(seed);
    let mut actions = Vec::new();
    let mut t_len = 1;
    let mut success = env.success();
    while !success && t_len <= horizon {
        let a = policy(env);
        let out = env.step(&[a.x, a.y]);
        actions.extend_from_slice(&[a.x, a.y]);
        states.extend_from_slice(&out.state);
        t_len += 1;
        success = env.success();
    }
    RecordedRun {
        states,
        actions,
        t_len,
        success,
    }
}

/// Generates `n_episodes` successful scripted demonstrations.
///
/// Failed attempts are discarded and resampled; each recorded episode's
/// metadata carries its oracle mode and the running discard count.
pub fn oracle_demos(env_name: &str, n_episodes: usize, seed: u64) -> Result<Dataset> {
    let probe = crate::env::make_env(env_name)?;
    let spec = probe.spec().clone();
    drop(probe);

    let mut episodes = Vec::with_capacity(n_episodes);
    let mut discarded = 0usize;
    let mut attempt = 0u64;
    let max_attempts = 40 * n_episodes as u64 + 200;
    while episodes.len() < n_episodes {
        if attempt >= max_attempts {
            return Err(EnvError::Oracle(format!(
                "{env_name}: oracle failed too often ({discarded} discards for {} successes)",
                episodes.len()
            )));
        }
        let ep_seed = Rng::new(seed, attempt).next_u64();
        attempt += 1;
        let mut oracle_rng = Rng::new(ep_seed, 0xB0);

        let (run, mode) = match env_name {
            "pointmass" => {
                let mut env = PointmassEnv::new();
                let run = run_episode(&mut env, pointmass_action, ep_seed);
                (run, "straight".to_string())
            }
            "blockpush" => {
                let mut env = BlockPushEnv::new();
                let oracle = BlockPushOracle::new(&mut oracle_rng);
                let mode = oracle.mode.clone();
                let run = run_episode(&mut env, |e| oracle.action(e), ep_seed);
                (run, mode)
            }
            "pushl" => {
                let mut env = PushLEnv::new();
                let mut oracle = PushLOracle::new(&mut oracle_rng);
                let mode = oracle.mode.clone();
                let run = run_episode(&mut env, |e| oracle.action(e), ep_seed);
                (run, mode)
            }
            other => return Err(EnvError::UnknownEnv(other.to_string())),
        };

        if !run.success {
            discarded += 1;
            continue;
        }
        let metadata = BTreeMap::from([
            ("mode".to_string(), mode),
            ("discarded_so_far".to_string(), discarded.to_string()),
        ]);
        episodes.push(Episode {
            env_name: env_name.to_string(),
            seed: ep_seed,
            success: true,
            t_len: run.t_len,
            states: run.states,
            actions: run.actions,
            metadata,
        });
    }
    Ok(Dataset::new(
        env_name,
        spec.state_dim,
        spec.action_dim,
        spec.action_low,
        spec.action_high,
        episodes,
    ))
}
