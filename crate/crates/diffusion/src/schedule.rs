use numkit::Tensor;

use crate::{DiffusionError, Result};

const COSINE_S: f64 = 0.008;
const MAX_BETA: f64 = 0.999;
const LINEAR_BETA_START: f64 = 1e-4;
const LINEAR_BETA_END: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = DiffusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(DiffusionError::Schedule(format!("unknown kind {other}"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleKind::Cosine => write!(f, "cosine"),
            ScheduleKind::Linear => write!(f, "linear"),
        }
    }
}

/// Per-step diffusion constants. All vectors are indexed by `k - 1` for
/// `k in 1..=k_steps`; `alpha_bar` is the running product of `alpha`.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub k_steps: usize,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

/// The squared-cosine cumulative signal level at progress `k/K`.
pub fn cosine_alpha_bar(k: usize, k_steps: usize) -> f64 {
    let f = |t: f64| {
        let angle = (t + COSINE_S) / (1.0 + COSINE_S) * std::f64::consts::FRAC_PI_2;
        angle.cos().powi(2)
    };
    f(k as f64 / k_steps as f64) / f(0.0)
}

pub fn make_schedule(kind: ScheduleKind, k_steps: usize) -> Result<NoiseSchedule> {
    if k_steps < 1 {
        return Err(DiffusionError::Schedule("K must be at least 1".into()));
    }
    let beta: Vec<f64> = match kind {
        ScheduleKind::Cosine => (1..=k_steps)
            .map(|k| {
                let ratio = cosine_alpha_bar(k, k_steps) / cosine_alpha_bar(k - 1, k_steps);
                (1.0 - ratio).min(MAX_BETA)
            })
            .collect(),
        ScheduleKind::Linear => {
            if k_steps == 1 {
                vec![LINEAR_BETA_START]
            } else {
                (0..k_steps)
                    .map(|i| {
                        let t = i as f64 / (k_steps - 1) as f64;
                        LINEAR_BETA_START + t * (LINEAR_BETA_END - LINEAR_BETA_START)
                    })
                    .collect()
            }
        }
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(k_steps);
    let mut run = 1.0;
    for a in &alpha {
        run *= a;
        alpha_bar.push(run);
    }
    let schedule = NoiseSchedule {
        kind,
        k_steps,
        beta,
        alpha,
        alpha_bar,
    };
    schedule.validate()?;
    Ok(schedule)
}

impl NoiseSchedule {
    fn validate(&self) -> Result<()> {
        for (i, &b) in self.beta.iter().enumerate() {
            if !(b > 0.0 && b <= MAX_BETA) {
                return Err(DiffusionError::Schedule(format!(
                    "beta_{} = {b} outside (0, {MAX_BETA}]",
                    i + 1
                )));
            }
        }
        let mut prev = 1.0;
        for (i, &ab) in self.alpha_bar.iter().enumerate() {
            if ab >= prev {
                return Err(DiffusionError::Schedule(format!(
                    "alpha_bar not strictly decreasing at k = {}",
                    i + 1
                )));
            }
            prev = ab;
        }
        Ok(())
    }

    /// Cumulative signal level at step `k` (1-based); `k = 0` is 1.
    pub fn alpha_bar_at(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.alpha_bar[k - 1]
        }
    }

    /// Posterior standard deviation at step `k` using the "small" variance
    /// beta_k * (1 - alpha_bar_{k-1}) / (1 - alpha_bar_k).
    pub fn posterior_sigma(&self, k: usize) -> f64 {
        let ab_prev = self.alpha_bar_at(k - 1);
        let ab = self.alpha_bar_at(k);
        (self.beta[k - 1] * (1.0 - ab_prev) / (1.0 - ab)).sqrt()
    }

    /// Forward corruption: sqrt(abar_k) * x0 + sqrt(1 - abar_k) * eps.
    pub fn q_sample(&self, x0: &Tensor, k: usize, eps: &Tensor) -> Result<Tensor> {
        if k < 1 || k > self.k_steps {
            return Err(DiffusionError::Invalid(format!(
                "q_sample step {k} outside 1..={}",
                self.k_steps
            )));
        }
        if x0.shape() != eps.shape() {
            return Err(DiffusionError::Num(numkit::NumError::ShapeMismatch {
                op: "q_sample",
                lhs: x0.shape().to_vec(),
                rhs: eps.shape().to_vec(),
            }));
        }
        let ab = self.alpha_bar_at(k);
        let (cs, cn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let data = x0
            .data()
            .iter()
            .zip(eps.data())
            .map(|(x, e)| cs * x + cn * e)
            .collect();
        Ok(Tensor::new(x0.shape().to_vec(), data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use numkit::Rng;

    #[test]
    fn cosine_k100_matches_published_formula_and_endpoints() {
        let s = make_schedule(ScheduleKind::Cosine, 100).unwrap();
        // wherever the beta cap did not bind, the cumulative product must
        // reproduce the closed-form curve
        for k in 1..=100 {
            if s.beta[k - 1] < MAX_BETA {
                let want = cosine_alpha_bar(k, 100);
                let got = s.alpha_bar_at(k);
                let rel = (got - want).abs() / want.max(1e-300);
                assert!(rel < 1e-10, "k={k}: {got} vs {want}");
            }
        }
        assert!(s.alpha_bar_at(1) > 0.99, "abar_1 = {}", s.alpha_bar_at(1));
        assert!(s.alpha_bar_at(100) < 0.05, "abar_K = {}", s.alpha_bar_at(100));
        for k in 2..=100 {
            assert!(s.alpha_bar_at(k) < s.alpha_bar_at(k - 1));
        }
    }

    #[test]
    fn single_step_schedule_noising_variance() {
        let s = make_schedule(ScheduleKind::Cosine, 1).unwrap();
        assert_eq!(s.k_steps, 1);
        let want_var = 1.0 - s.alpha_bar_at(1);
        let n = 10_000;
        let mut rng = Rng::new(5, 0);
        let x0 = Tensor::zeros(&[n]);
        let eps = Tensor::gaussian(&mut rng, &[n]);
        let noisy = s.q_sample(&x0, 1, &eps).unwrap();
        let mean = noisy.data().iter().sum::<f64>() / n as f64;
        let var = noisy.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sigma_of_var = want_var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - want_var).abs() < 3.0 * sigma_of_var, "{var} vs {want_var}");
    }

    #[test]
    fn linear_two_step_product_by_hand() {
        let s = make_schedule(ScheduleKind::Linear, 2).unwrap();
        assert_eq!(s.beta, vec![1e-4, 0.02]);
        let want = (1.0 - 1e-4) * (1.0 - 0.02);
        assert!((s.alpha_bar_at(2) - want).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(make_schedule(ScheduleKind::Cosine, 0).is_err());
    }

    #[test]
    fn sigma_nonnegative_everywhere() {
        for kind in [ScheduleKind::Cosine, ScheduleKind::Linear] {
            let s = make_schedule(kind, 60).unwrap();
            for k in 1..=60 {
                assert!(s.posterior_sigma(k) >= 0.0);
            }
        }
    }

    #[test]
    fn q_sample_degenerate_inputs() {
        let s = make_schedule(ScheduleKind::Cosine, 10).unwrap();
        let x0 = Tensor::from_slice(&[1.0, -2.0, 0.5]);
        let zero = Tensor::zeros(&[3]);
        let k = 4;
        let ab = s.alpha_bar_at(k);

        let signal_only = s.q_sample(&x0, k, &zero).unwrap();
        for (got, x) in signal_only.data().iter().zip(x0.data()) {
            assert_eq!(*got, ab.sqrt() * x);
        }

        let eps = Tensor::from_slice(&[0.3, 0.7, -1.1]);
        let noise_only = s.q_sample(&zero, k, &eps).unwrap();
        for (got, e) in noise_only.data().iter().zip(eps.data()) {
            assert_eq!(*got, (1.0 - ab).sqrt() * e);
        }

        assert!(s.q_sample(&x0, 0, &zero).is_err());
        assert!(s.q_sample(&x0, 11, &zero).is_err());
        let short = Tensor::zeros(&[2]);
        assert!(s.q_sample(&x0, 3, &short).is_err());
    }

    #[test]
    fn terminal_step_decorrelates_from_signal() {
        // with abar_K near zero the noisy sample barely remembers x0
        let s = make_schedule(ScheduleKind::Cosine, 100).unwrap();
        let n = 10_000;
        let mut rng = Rng::new(17, 0);
        let x0 = Tensor::gaussian(&mut rng, &[n]);
        let eps = Tensor::gaussian(&mut rng, &[n]);
        let noisy = s.q_sample(&x0, 100, &eps).unwrap();
        let mean_x = x0.data().iter().sum::<f64>() / n as f64;
        let mean_y = noisy.data().iter().sum::<f64>() / n as f64;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (x, y) in x0.data().iter().zip(noisy.data()) {
            sxx += (x - mean_x) * (x - mean_x);
            syy += (y - mean_y) * (y - mean_y);
            sxy += (x - mean_x) * (y - mean_y);
        }
        let corr = sxy / (sxx.sqrt() * syy.sqrt());
        assert!(corr.abs() < 0.1, "corr = {corr}");
    }
}
