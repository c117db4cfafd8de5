//! The two trainable networks: a temporal-convolutional noise predictor for
//! state sequences and a multi-layer perceptron for inverse dynamics.
//!
//! Parameters live in a [`ParamSet`] as plain tensors; `bind` registers them
//! on a [`numkit::Tape`] (trainable or frozen) and the forward passes operate
//! on the returned handles. Forward passes are deterministic functions of
//! parameters and inputs.

mod denoiser;
mod embed;
mod invdyn;
mod param;

pub use denoiser::{DenoiserConfig, DenoiserNet, DenoiserVars};
pub use embed::SinusoidalEmbedding;
pub use invdyn::{InvDynConfig, InvDynNet, InvDynVars};
pub use param::ParamSet;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("net config: {0}")]
    Config(String),

    #[error(transparent)]
    Num(#[from] numkit::NumError),
}

pub type Result<T> = std::result::Result<T, NetError>;
