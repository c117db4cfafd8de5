//! Monte-Carlo check of the forward-corruption marginals: at any step k,
//! q_sample has mean sqrt(abar_k)*x0 and variance 1 - abar_k.

use diffusion::{make_schedule, ScheduleKind};
use numkit::{Rng, Tensor};

#[test]
fn q_sample_marginals_match_closed_form() {
    let schedule = make_schedule(ScheduleKind::Cosine, 50).unwrap();
    let n = 10_000;
    let x0_value = 0.7;
    let x0 = Tensor::full(&[n], x0_value);
    let mut rng = Rng::new(31, 2);
    for k in [1usize, 10, 25, 50] {
        let eps = Tensor::gaussian(&mut rng, &[n]);
        let noisy = schedule.q_sample(&x0, k, &eps).unwrap();
        let ab = schedule.alpha_bar_at(k);
        let want_mean = ab.sqrt() * x0_value;
        let want_var = 1.0 - ab;

        let mean = noisy.data().iter().sum::<f64>() / n as f64;
        let var = noisy
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1) as f64;

        let sigma_mean = want_var.sqrt() / (n as f64).sqrt();
        let sigma_var = want_var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (mean - want_mean).abs() < 3.0 * sigma_mean,
            "k={k}: mean {mean} vs {want_mean}"
        );
        assert!(
            (var - want_var).abs() < 3.0 * sigma_var.max(1e-12),
            "k={k}: var {var} vs {want_var}"
        );
    }
}
