//! DDPM machinery: variance schedules, forward noising, the noise-prediction
//! training loss, and the iterative reverse sampler with inpainting
//! conditioning and a low-temperature initial draw.

mod loss;
mod sampler;
mod schedule;

pub use loss::{loss_pred, loss_pred_with, DiffusionBatch};
pub use sampler::{p_sample_loop, p_sample_loop_masked, SamplerConfig};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleKind};

use nets::{DenoiserNet, DenoiserVars};
use numkit::{Tape, Tensor, Var};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("schedule: {0}")]
    Schedule(String),

    #[error("sampler: non-finite values at denoising step {step}")]
    NonFinite { step: usize },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Net(#[from] nets::NetError),

    #[error(transparent)]
    Num(#[from] numkit::NumError),
}

pub type Result<T> = std::result::Result<T, DiffusionError>;

/// Anything that can estimate the noise component of a `[batch, channels,
/// seq]` tensor at given denoising steps. Implemented by the bound denoiser
/// network and by test stubs.
pub trait NoisePredictor {
    fn predict(&self, tape: &mut Tape, x: Var, steps: &[usize]) -> Result<Var>;
}

/// A denoiser network together with its tape bindings.
pub struct BoundDenoiser<'a> {
    pub net: &'a DenoiserNet,
    pub vars: &'a DenoiserVars,
}

impl NoisePredictor for BoundDenoiser<'_> {
    fn predict(&self, tape: &mut Tape, x: Var, steps: &[usize]) -> Result<Var> {
        Ok(self.net.forward(tape, self.vars, x, steps)?)
    }
}

/// [batch, time, channels] -> [batch, channels, time]
pub fn to_channels_first(t: &Tensor) -> Tensor {
    let s = t.shape();
    assert_eq!(s.len(), 3, "expected rank-3 tensor");
    let (b, time, c) = (s[0], s[1], s[2]);
    let src = t.data();
    let mut data = vec![0.0; src.len()];
    for bi in 0..b {
        for ti in 0..time {
            for ci in 0..c {
                data[(bi * c + ci) * time + ti] = src[(bi * time + ti) * c + ci];
            }
        }
    }
    Tensor::new(vec![b, c, time], data).expect("same element count")
}

/// [batch, channels, time] -> [batch, time, channels]
pub fn to_time_first(t: &Tensor) -> Tensor {
    let s = t.shape();
    assert_eq!(s.len(), 3, "expected rank-3 tensor");
    let (b, c, time) = (s[0], s[1], s[2]);
    let src = t.data();
    let mut data = vec![0.0; src.len()];
    for bi in 0..b {
        for ci in 0..c {
            for ti in 0..time {
                data[(bi * time + ti) * c + ci] = src[(bi * c + ci) * time + ti];
            }
        }
    }
    Tensor::new(vec![b, time, c], data).expect("same element count")
}
