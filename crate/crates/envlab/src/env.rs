use crate::body::ContactEvent;
use crate::geom::{Polygon, Vec2};
use crate::{EnvError, Result};

/// Static description of an environment's interface.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
    pub success_desc: String,
}

pub struct StepOutcome {
    pub state: Vec<f64>,
    pub contacts: Vec<ContactEvent>,
}

/// Drawable snapshot for the offline renderer.
pub struct Scene {
    pub pusher: Vec2,
    pub pusher_radius: f64,
    /// Convex parts per body.
    pub bodies: Vec<Vec<Polygon>>,
    pub goals: Vec<Polygon>,
}

/// A deterministic 2-D environment with keypoint state.
///
/// `reset(seed)` fully determines the episode; `step` is a pure function of
/// the current pose state and the action. Success and p-metrics read the
/// current state only.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> StepOutcome;
    fn state_vec(&self) -> Vec<f64>;
    fn success(&self) -> bool;
    /// Graded success levels, weakest first (e.g. one block delivered, two
    /// blocks delivered).
    fn p_metrics(&self) -> Vec<bool>;
    fn scene(&self) -> Scene;
}

pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "pointmass" => Ok(Box::new(crate::pointmass::PointmassEnv::new())),
        "blockpush" => Ok(Box::new(crate::blockpush::BlockPushEnv::new())),
        "pushl" => Ok(Box::new(crate::pushl::PushLEnv::new())),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

pub const ENV_NAMES: [&str; 3] = ["pointmass", "blockpush", "pushl"];
