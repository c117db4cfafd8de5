use numkit::{Rng, Tape, Tensor, Var};

use crate::param::ParamSet;
use crate::{NetError, Result};

/// MLP that maps a flattened window of past and future states to the action
/// taken at the window's pivot step.
#[derive(Debug, Clone)]
pub struct InvDynConfig {
    /// Flattened window length: (history + future) * state_dim.
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl InvDynConfig {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        InvDynConfig {
            input_dim,
            hidden: vec![256, 256],
            output_dim,
        }
    }
}

pub struct InvDynNet {
    pub cfg: InvDynConfig,
    params: ParamSet,
    layers: Vec<(usize, usize)>,
}

pub struct InvDynVars {
    pub all: Vec<Var>,
}

impl InvDynNet {
    pub fn new(cfg: InvDynConfig, rng: &mut Rng) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.output_dim == 0 {
            return Err(NetError::Config("invdyn dims must be positive".into()));
        }
        let mut params = ParamSet::new();
        let mut layers = Vec::new();
        let mut dims = vec![cfg.input_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(cfg.output_dim);
        for (i, pair) in dims.windows(2).enumerate() {
            let (din, dout) = (pair[0], pair[1]);
            let scale = 1.0 / (din as f64).sqrt();
            let mut w = Tensor::gaussian(rng, &[din, dout]);
            for v in w.data_mut() {
                *v *= scale;
            }
            let wi = params.add(format!("mlp{i}.w"), w);
            let bi = params.add(format!("mlp{i}.b"), Tensor::zeros(&[dout]));
            layers.push((wi, bi));
        }
        let net = InvDynNet { cfg, params, layers };
        log::info!("invdyn: {} parameters", net.param_count());
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn expected_param_count(cfg: &InvDynConfig) -> usize {
        let mut dims = vec![cfg.input_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(cfg.output_dim);
        dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> InvDynVars {
        InvDynVars {
            all: self.params.bind(tape, trainable),
        }
    }

    pub fn read_back(&mut self, tape: &Tape, vars: &InvDynVars) {
        self.params.read_back(tape, &vars.all);
    }

    /// `windows` is [batch, input_dim]; returns [batch, output_dim].
    pub fn forward(&self, tape: &mut Tape, vars: &InvDynVars, windows: Var) -> Result<Var> {
        let shape = tape.value(windows).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.cfg.input_dim {
            return Err(NetError::Config(format!(
                "invdyn expects [batch, {}], got {:?}",
                self.cfg.input_dim, shape
            )));
        }
        let v = &vars.all;
        let mut h = windows;
        let last = self.layers.len() - 1;
        for (i, (wi, bi)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, v[*wi])?;
            h = tape.add_bias(h, v[*bi])?;
            if i != last {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_net_outputs_bias() {
        let mut rng = Rng::new(0, 0);
        let cfg = InvDynConfig {
            input_dim: 6,
            hidden: vec![8],
            output_dim: 2,
        };
        let mut net = InvDynNet::new(cfg, &mut rng).unwrap();
        net.params_mut().zero_all();
        // set the output bias and check it passes straight through
        let last = net.params().len() - 1;
        net.params_mut()
            .tensor_mut(last)
            .data_mut()
            .copy_from_slice(&[0.25, -1.5]);
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape, false);
        let x = tape.constant(Tensor::gaussian(&mut rng, &[3, 6]));
        let y = net.forward(&mut tape, &vars, x).unwrap();
        for row in tape.value(y).data().chunks_exact(2) {
            assert_eq!(row, &[0.25, -1.5]);
        }
    }

    #[test]
    fn identical_windows_give_identical_actions() {
        let mut rng = Rng::new(1, 0);
        let net = InvDynNet::new(InvDynConfig::new(6, 2), &mut rng).unwrap();
        let w = Tensor::gaussian(&mut rng, &[1, 6]);
        let mut data = w.data().to_vec();
        data.extend_from_slice(w.data());
        let both = Tensor::new(vec![2, 6], data).unwrap();
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape, false);
        let x = tape.constant(both);
        let y = net.forward(&mut tape, &vars, x).unwrap();
        let out = tape.value(y).data();
        assert_eq!(&out[..2], &out[2..]);
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        let mut rng = Rng::new(2, 0);
        let net = InvDynNet::new(InvDynConfig::new(6, 2), &mut rng).unwrap();
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape, false);
        let x = tape.constant(Tensor::zeros(&[1, 5]));
        assert!(net.forward(&mut tape, &vars, x).is_err());
    }

    #[test]
    fn param_count_matches_closed_form() {
        let mut rng = Rng::new(3, 0);
        let cfg = InvDynConfig::new(12, 3);
        let net = InvDynNet::new(cfg.clone(), &mut rng).unwrap();
        assert_eq!(net.param_count(), InvDynNet::expected_param_count(&cfg));
        assert_eq!(
            InvDynNet::expected_param_count(&cfg),
            12 * 256 + 256 + 256 * 256 + 256 + 256 * 3 + 3
        );
    }

    #[test]
    fn output_is_finite_for_finite_input() {
        let mut rng = Rng::new(4, 0);
        let net = InvDynNet::new(InvDynConfig::new(10, 4), &mut rng).unwrap();
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape, false);
        let x = tape.constant(Tensor::full(&[2, 10], 1e6));
        let y = net.forward(&mut tape, &vars, x).unwrap();
        assert!(tape.value(y).is_finite());
    }
}
