//! Deterministic 2-D manipulation environments with keypoint state, scripted
//! demonstration oracles, and the on-disk dataset store.
//!
//! Physics is a simplified quasi-static contact model: blocks move exactly
//! by penetration-resolving displacements, capped by the pusher's step, with
//! rotation from the contact lever arm. All gains and dimensions live in
//! [`constants`].

pub mod blockpush;
mod body;
pub mod constants;
mod dataset;
mod env;
pub mod geom;
mod oracle;
pub mod pointmass;
pub mod pushl;

pub use body::{clamp_into_workspace, Body, BodyShape, ContactEvent, ContactKind};
pub use dataset::{Dataset, DatasetMeta, Episode, NormStats, DATASET_MAGIC, FORMAT_VERSION};
pub use env::{make_env, EnvSpec, Environment, Scene, StepOutcome, ENV_NAMES};
pub use oracle::oracle_demos;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown environment {0:?}")]
    UnknownEnv(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EnvError>;
