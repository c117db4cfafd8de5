use crate::{NumError, Result, Tape, Var};

/// Adam with bias correction. Moment buffers are zero-initialized, so a step
/// under all-zero gradients leaves parameters untouched.
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update to `params` in place, reading their gradients from
    /// the tape. The parameter list must be identical (same order, same
    /// shapes) on every call.
    pub fn step(&mut self, tape: &mut Tape, params: &[Var]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| {
                    let n = tape.value(*p).numel();
                    (vec![0.0; n], vec![0.0; n])
                })
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(NumError::invalid(
                "adam",
                format!("expected {} parameters, got {}", self.moments.len(), params.len()),
            ));
        }
        self.step_count += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);
        for (p, (m, v)) in params.iter().zip(self.moments.iter_mut()) {
            let node = tape.value_mut(*p);
            let n = node.numel();
            if m.len() != n {
                return Err(NumError::invalid("adam", "parameter shape changed between steps"));
            }
            let Some(grad) = node.grad.take() else {
                continue; // no gradient reached this parameter
            };
            let data = node.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
            node.grad = Some(grad);
        }
        Ok(())
    }
}
