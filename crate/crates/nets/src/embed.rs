use numkit::Tensor;

use crate::{NetError, Result};

/// Sinusoidal position/step embedding: `[sin(k*w_0..), cos(k*w_0..)]` with
/// geometrically spaced frequencies. Step 0 embeds to all-zero sines and
/// all-one cosines.
#[derive(Debug, Clone, Copy)]
pub struct SinusoidalEmbedding {
    pub dim: usize,
}

impl SinusoidalEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(NetError::Config(format!(
                "embedding dim must be even and positive, got {dim}"
            )));
        }
        Ok(SinusoidalEmbedding { dim })
    }

    pub fn embed(&self, step: usize) -> Vec<f64> {
        let half = self.dim / 2;
        let mut out = vec![0.0; self.dim];
        for i in 0..half {
            let freq = (-(10_000.0f64.ln()) * i as f64 / half as f64).exp();
            let angle = step as f64 * freq;
            out[i] = angle.sin();
            out[half + i] = angle.cos();
        }
        out
    }

    /// Embeds a batch of steps into a `[batch, dim]` tensor.
    pub fn embed_batch(&self, steps: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(steps.len() * self.dim);
        for &k in steps {
            data.extend_from_slice(&self.embed(k));
        }
        Tensor::new(vec![steps.len(), self.dim], data).expect("shape by construction")
    }
}
