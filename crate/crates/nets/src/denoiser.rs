use numkit::{Rng, Tape, Tensor, Var};

use crate::param::ParamSet;
use crate::{NetError, Result, SinusoidalEmbedding};

/// Architecture of the temporal-convolutional noise predictor.
#[derive(Debug, Clone)]
pub struct DenoiserConfig {
    /// Channels of the sequence being denoised (state dim, or state+action
    /// for the action-diffusion baseline).
    pub in_channels: usize,
    /// Conv channels per residual block.
    pub channels: Vec<usize>,
    /// Odd conv kernel width; the sequence length is preserved.
    pub kernel: usize,
    /// Sinusoidal embedding width for the denoising step index.
    pub embed_dim: usize,
    /// Width of the step-embedding MLP.
    pub temb_dim: usize,
    /// GroupNorm group count; must divide every entry of `channels`.
    pub groups: usize,
    /// Largest denoising step index this net accepts (the schedule's K).
    pub max_step: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            in_channels: 2,
            channels: vec![64, 128],
            kernel: 5,
            embed_dim: 64,
            temb_dim: 128,
            groups: 8,
            max_step: 100,
        }
    }
}

struct BlockIdx {
    conv_a_w: usize,
    conv_a_b: usize,
    gn_a_g: usize,
    gn_a_b: usize,
    temb_w: usize,
    temb_b: usize,
    conv_b_w: usize,
    conv_b_b: usize,
    gn_b_g: usize,
    gn_b_b: usize,
    res_w: Option<usize>,
}

/// Residual temporal-conv noise predictor.
///
/// Each block: conv -> GroupNorm -> +step-bias -> mish -> conv -> GroupNorm
/// -> mish, with an identity (or 1x1 conv) skip. A final 1x1 conv projects
/// back to the input channel count, so the output shape equals the input
/// shape. The denoising step index enters through a sinusoidal embedding and
/// a two-layer MLP, injected per block as a per-sample channel bias.
pub struct DenoiserNet {
    pub cfg: DenoiserConfig,
    params: ParamSet,
    embed: SinusoidalEmbedding,
    temb_idx: [usize; 4],
    blocks: Vec<BlockIdx>,
    out_idx: [usize; 2],
}

/// Tape handles for one bound instance of the parameters.
pub struct DenoiserVars {
    pub all: Vec<Var>,
}

fn init_weight(rng: &mut Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let scale = 1.0 / (fan_in as f64).sqrt();
    let mut t = Tensor::gaussian(rng, shape);
    for v in t.data_mut() {
        *v *= scale;
    }
    t
}

impl DenoiserNet {
    pub fn new(cfg: DenoiserConfig, rng: &mut Rng) -> Result<Self> {
        if cfg.in_channels == 0 || cfg.channels.is_empty() {
            return Err(NetError::Config("denoiser needs channels".into()));
        }
        if cfg.kernel % 2 == 0 {
            return Err(NetError::Config(format!(
                "kernel must be odd to preserve length, got {}",
                cfg.kernel
            )));
        }
        for &c in &cfg.channels {
            if cfg.groups == 0 || c % cfg.groups != 0 {
                return Err(NetError::Config(format!(
                    "groups {} must divide channel count {c}",
                    cfg.groups
                )));
            }
        }
        let embed = SinusoidalEmbedding::new(cfg.embed_dim)?;
        let mut params = ParamSet::new();
        let te = cfg.temb_dim;
        let temb_idx = [
            params.add("temb.l1.w", init_weight(rng, &[cfg.embed_dim, te], cfg.embed_dim)),
            params.add("temb.l1.b", Tensor::zeros(&[te])),
            params.add("temb.l2.w", init_weight(rng, &[te, te], te)),
            params.add("temb.l2.b", Tensor::zeros(&[te])),
        ];
        let mut blocks = Vec::new();
        let mut c_prev = cfg.in_channels;
        for (i, &c) in cfg.channels.iter().enumerate() {
            let k = cfg.kernel;
            let block = BlockIdx {
                conv_a_w: params.add(
                    format!("block{i}.conv_a.w"),
                    init_weight(rng, &[c, c_prev, k], c_prev * k),
                ),
                conv_a_b: params.add(format!("block{i}.conv_a.b"), Tensor::zeros(&[c])),
                gn_a_g: params.add(format!("block{i}.gn_a.gamma"), Tensor::full(&[c], 1.0)),
                gn_a_b: params.add(format!("block{i}.gn_a.beta"), Tensor::zeros(&[c])),
                temb_w: params.add(format!("block{i}.temb.w"), init_weight(rng, &[te, c], te)),
                temb_b: params.add(format!("block{i}.temb.b"), Tensor::zeros(&[c])),
                conv_b_w: params.add(
                    format!("block{i}.conv_b.w"),
                    init_weight(rng, &[c, c, k], c * k),
                ),
                conv_b_b: params.add(format!("block{i}.conv_b.b"), Tensor::zeros(&[c])),
                gn_b_g: params.add(format!("block{i}.gn_b.gamma"), Tensor::full(&[c], 1.0)),
                gn_b_b: params.add(format!("block{i}.gn_b.beta"), Tensor::zeros(&[c])),
                res_w: if c_prev == c {
                    None
                } else {
                    Some(params.add(
                        format!("block{i}.res.w"),
                        init_weight(rng, &[c, c_prev, 1], c_prev),
                    ))
                },
            };
            blocks.push(block);
            c_prev = c;
        }
        let out_idx = [
            params.add("out.w", init_weight(rng, &[cfg.in_channels, c_prev, 1], c_prev)),
            params.add("out.b", Tensor::zeros(&[cfg.in_channels])),
        ];
        let net = DenoiserNet {
            cfg,
            params,
            embed,
            temb_idx,
            blocks,
            out_idx,
        };
        log::info!("denoiser: {} parameters", net.param_count());
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> DenoiserVars {
        DenoiserVars {
            all: self.params.bind(tape, trainable),
        }
    }

    pub fn read_back(&mut self, tape: &Tape, vars: &DenoiserVars) {
        self.params.read_back(tape, &vars.all);
    }

    /// Predicts the noise component of `x` ([batch, in_channels, seq_len])
    /// at per-sample denoising step `steps` (each in `1..=max_step`). The
    /// output has the shape of the input.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &DenoiserVars,
        x: Var,
        steps: &[usize],
    ) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 || shape[1] != self.cfg.in_channels {
            return Err(NetError::Config(format!(
                "denoiser expects [batch, {}, seq], got {:?}",
                self.cfg.in_channels, shape
            )));
        }
        if steps.len() != shape[0] {
            return Err(NetError::Config(format!(
                "{} step indices for batch of {}",
                steps.len(),
                shape[0]
            )));
        }
        if let Some(&bad) = steps.iter().find(|&&k| k < 1 || k > self.cfg.max_step) {
            return Err(NetError::Config(format!(
                "denoising step {bad} outside 1..={}",
                self.cfg.max_step
            )));
        }
        let v = &vars.all;
        let pad = (self.cfg.kernel - 1) / 2;

        // step embedding -> two-layer MLP
        let emb = tape.constant(self.embed.embed_batch(steps));
        let mut temb = tape.matmul(emb, v[self.temb_idx[0]])?;
        temb = tape.add_bias(temb, v[self.temb_idx[1]])?;
        temb = tape.mish(temb)?;
        temb = tape.matmul(temb, v[self.temb_idx[2]])?;
        temb = tape.add_bias(temb, v[self.temb_idx[3]])?;

        let mut h = x;
        for block in &self.blocks {
            let mut a = tape.conv1d(h, v[block.conv_a_w], pad)?;
            a = tape.add_channel_bias(a, v[block.conv_a_b])?;
            a = tape.group_norm(a, v[block.gn_a_g], v[block.gn_a_b], self.cfg.groups, 1e-5)?;
            let mut tb = tape.matmul(temb, v[block.temb_w])?;
            tb = tape.add_bias(tb, v[block.temb_b])?;
            a = tape.add_channel_bias(a, tb)?;
            a = tape.mish(a)?;
            let mut b = tape.conv1d(a, v[block.conv_b_w], pad)?;
            b = tape.add_channel_bias(b, v[block.conv_b_b])?;
            b = tape.group_norm(b, v[block.gn_b_g], v[block.gn_b_b], self.cfg.groups, 1e-5)?;
            b = tape.mish(b)?;
            let res = match block.res_w {
                Some(w) => tape.conv1d(h, v[w], 0)?,
                None => h,
            };
            h = tape.add(b, res)?;
        }
        let mut out = tape.conv1d(h, v[self.out_idx[0]], 0)?;
        out = tape.add_channel_bias(out, v[self.out_idx[1]])?;
        Ok(out)
    }

    /// Closed-form parameter count from the layer sizes, for auditing.
    pub fn expected_param_count(cfg: &DenoiserConfig) -> usize {
        let te = cfg.temb_dim;
        let mut n = cfg.embed_dim * te + te + te * te + te;
        let mut c_prev = cfg.in_channels;
        for &c in &cfg.channels {
            n += c * c_prev * cfg.kernel + c; // conv_a
            n += 2 * c; // gn_a
            n += te * c + c; // temb proj
            n += c * c * cfg.kernel + c; // conv_b
            n += 2 * c; // gn_b
            if c_prev != c {
                n += c * c_prev; // 1x1 residual
            }
            c_prev = c;
        }
        n + cfg.in_channels * c_prev + cfg.in_channels
    }
}
