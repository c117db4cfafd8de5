//! Dense f64 tensor numerics with reverse-mode automatic differentiation.
//!
//! The crate is deliberately small: row-major contiguous tensors, an explicit
//! gradient [`Tape`], an Adam optimizer, a counter-based splittable [`Rng`],
//! and a binary checkpoint format. Everything runs in 64-bit floats so that
//! analytic gradients can be held to tight finite-difference tolerances.

mod ckpt;
mod error;
mod ops;
mod optim;
pub mod par;
mod rng;
mod tape;
mod tensor;

pub use ckpt::{read_checkpoint, write_checkpoint, CKPT_MAGIC};
pub use error::NumError;
pub use optim::Adam;
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, NumError>;
