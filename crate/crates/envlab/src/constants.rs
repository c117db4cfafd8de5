//! Every geometric and contact constant of the simulated environments, in
//! one place.

/// Square workspace; all positions live in [0, WORKSPACE]^2.
pub const WORKSPACE: f64 = 512.0;

/// Radius of the circular pusher (end effector).
pub const PUSHER_RADIUS: f64 = 10.0;

/// Largest pusher displacement per step; actions are clamped to this norm.
pub const MAX_STEP: f64 = 4.0;

/// Point-mass task: success when the pusher is within this distance of the
/// goal.
pub const POINTMASS_GOAL_RADIUS: f64 = 8.0;
pub const POINTMASS_HORIZON: usize = 80;

/// Block-push task: two square blocks of this side length.
pub const BLOCK_SIDE: f64 = 30.0;
/// Side length of each square goal region.
pub const GOAL_SIDE: f64 = 60.0;
/// Fixed goal-square centers.
pub const GOAL_CENTERS: [[f64; 2]; 2] = [[166.0, 400.0], [346.0, 400.0]];
pub const BLOCKPUSH_HORIZON: usize = 200;

/// Push-L task: cell size of the L-tromino (each L is three CELL x CELL
/// squares); the docked pair forms a 2x3-cell rectangle.
pub const L_CELL: f64 = 30.0;
/// Center of the fixed goal rectangle (2*L_CELL wide, 3*L_CELL tall).
pub const PUSHL_GOAL_CENTER: [f64; 2] = [256.0, 400.0];
/// Fraction of the goal rectangle the blocks must jointly cover.
pub const PUSHL_COVERAGE_THRESHOLD: f64 = 0.8;
pub const PUSHL_HORIZON: usize = 300;

/// Quasi-static contact: a penetrating pusher displaces the block by the
/// penetration-resolving vector t, and rotates it about its center by
/// cross(normalize(lever), t) * ROTATION_GAIN / side_length, where lever
/// runs from the block center to the contact point.
pub const ROTATION_GAIN: f64 = 1.0;

/// Half-width of the spawn margin keeping initial poses inside the
/// workspace.
pub const SPAWN_MARGIN: f64 = 60.0;
