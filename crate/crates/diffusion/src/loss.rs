use numkit::{Rng, Tape, Tensor, Var};

use crate::{to_channels_first, DiffusionError, NoisePredictor, NoiseSchedule, Result};

/// A batch of clean sequences plus the masks that define what is
/// conditioning and what is supervised.
///
/// Shapes: `seqs` is `[batch, time, channels]`, normalized to [-1, 1]. The
/// masks are `[time, channels]`, shared across the batch:
/// - `cond_mask` marks positions held fixed at every denoising iteration;
/// - `value_mask` marks which of those held positions carry the clean value
///   (the rest are held at zero);
/// - `loss_mask` marks positions the noise-prediction loss is averaged over.
pub struct DiffusionBatch {
    pub seqs: Tensor,
    pub cond_mask: Tensor,
    pub value_mask: Tensor,
    pub loss_mask: Tensor,
}

impl DiffusionBatch {
    /// State-prediction conditioning: the first `history_len` frames are
    /// inpainted with observed states and masked out of the loss.
    pub fn state_prediction(seqs: Tensor, history_len: usize) -> Result<Self> {
        let (t, c) = Self::check_seqs(&seqs, history_len)?;
        let mut cond = Tensor::zeros(&[t, c]);
        for row in 0..history_len {
            cond.data_mut()[row * c..(row + 1) * c].fill(1.0);
        }
        let loss = complement(&cond);
        Ok(DiffusionBatch {
            seqs,
            value_mask: cond.clone(),
            cond_mask: cond,
            loss_mask: loss,
        })
    }

    /// Action-diffusion conditioning over a combined [state | action]
    /// sequence: state channels are a fixed canvas (observed history for the
    /// first `history_len` frames, zeros beyond), and only action channels
    /// are denoised and supervised.
    pub fn conditioned_canvas(seqs: Tensor, history_len: usize, state_dim: usize) -> Result<Self> {
        let (t, c) = Self::check_seqs(&seqs, history_len)?;
        if state_dim >= c {
            return Err(DiffusionError::Invalid(format!(
                "state_dim {state_dim} leaves no action channels in width {c}"
            )));
        }
        let mut cond = Tensor::zeros(&[t, c]);
        let mut value = Tensor::zeros(&[t, c]);
        for row in 0..t {
            for col in 0..state_dim {
                cond.data_mut()[row * c + col] = 1.0;
                if row < history_len {
                    value.data_mut()[row * c + col] = 1.0;
                }
            }
        }
        let loss = complement(&cond);
        Ok(DiffusionBatch {
            seqs,
            cond_mask: cond,
            value_mask: value,
            loss_mask: loss,
        })
    }

    fn check_seqs(seqs: &Tensor, history_len: usize) -> Result<(usize, usize)> {
        let s = seqs.shape();
        if s.len() != 3 {
            return Err(DiffusionError::Invalid(format!(
                "expected [batch, time, channels], got {:?}",
                s
            )));
        }
        if history_len >= s[1] {
            return Err(DiffusionError::Invalid(format!(
                "history length {history_len} must be shorter than the sequence ({})",
                s[1]
            )));
        }
        Ok((s[1], s[2]))
    }

    pub fn batch_size(&self) -> usize {
        self.seqs.shape()[0]
    }
}

fn complement(mask: &Tensor) -> Tensor {
    let data = mask.data().iter().map(|v| 1.0 - v).collect();
    Tensor::new(mask.shape().to_vec(), data).expect("same shape")
}

/// Draws per-sample steps and noise, then delegates to [`loss_pred_with`].
pub fn loss_pred(
    tape: &mut Tape,
    predictor: &impl NoisePredictor,
    batch: &DiffusionBatch,
    schedule: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<Var> {
    let b = batch.batch_size();
    let steps: Vec<usize> = (0..b).map(|_| 1 + rng.below(schedule.k_steps)).collect();
    let eps = Tensor::gaussian(rng, batch.seqs.shape());
    loss_pred_with(tape, predictor, batch, schedule, &steps, &eps)
}

/// Deterministic core of the noise-prediction loss: corrupt each sequence at
/// its step, overwrite conditioned positions, run the predictor, and average
/// the squared error against the injected noise over the loss mask.
pub fn loss_pred_with(
    tape: &mut Tape,
    predictor: &impl NoisePredictor,
    batch: &DiffusionBatch,
    schedule: &NoiseSchedule,
    steps: &[usize],
    eps: &Tensor,
) -> Result<Var> {
    let shape = batch.seqs.shape().to_vec();
    let (b, t, c) = (shape[0], shape[1], shape[2]);
    if eps.shape() != shape.as_slice() {
        return Err(DiffusionError::Num(numkit::NumError::ShapeMismatch {
            op: "loss_pred",
            lhs: shape,
            rhs: eps.shape().to_vec(),
        }));
    }
    if steps.len() != b {
        return Err(DiffusionError::Invalid(format!(
            "{} steps for batch of {b}",
            steps.len()
        )));
    }

    // corrupt, then apply conditioning: x = q(x0) where free, clean*value
    // where held
    let mut noisy = vec![0.0; b * t * c];
    let cond = batch.cond_mask.data();
    let value = batch.value_mask.data();
    for bi in 0..b {
        let k = steps[bi];
        if k < 1 || k > schedule.k_steps {
            return Err(DiffusionError::Invalid(format!(
                "step {k} outside 1..={}",
                schedule.k_steps
            )));
        }
        let ab = schedule.alpha_bar_at(k);
        let (cs, cn) = (ab.sqrt(), (1.0 - ab).sqrt());
        for i in 0..t * c {
            let clean = batch.seqs.data()[bi * t * c + i];
            let e = eps.data()[bi * t * c + i];
            let corrupted = cs * clean + cn * e;
            noisy[bi * t * c + i] = if cond[i] > 0.5 { clean * value[i] } else { corrupted };
        }
    }
    let noisy = Tensor::new(vec![b, t, c], noisy)?;

    // per-batch expansion of the loss mask in channels-first layout
    let mut mask = vec![0.0; b * t * c];
    let lm = batch.loss_mask.data();
    for bi in 0..b {
        mask[bi * t * c..(bi + 1) * t * c].copy_from_slice(lm);
    }
    let mask_cf = to_channels_first(&Tensor::new(vec![b, t, c], mask)?);
    let count: f64 = lm.iter().sum::<f64>() * b as f64;
    if count == 0.0 {
        return Err(DiffusionError::Invalid("loss mask is empty".into()));
    }

    let x = tape.constant(to_channels_first(&noisy));
    let target = tape.constant(to_channels_first(eps));
    let mask_var = tape.constant(mask_cf);
    let pred = predictor.predict(tape, x, steps)?;
    let diff = tape.sub(pred, target)?;
    let masked = tape.mul(diff, mask_var)?;
    let sq = tape.mul(masked, masked)?;
    let total = tape.reduce_sum(sq)?;
    Ok(tape.scale(total, 1.0 / count)?)
}
