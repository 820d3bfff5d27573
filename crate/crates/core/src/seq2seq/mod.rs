//! Single-document question generator.
//!
//! A 2-layer bidirectional LSTM encoder feeds a single-layer LSTM decoder
//! with bilinear attention (`score_j = h · W_a · H_j`), a ReLU combiner over
//! `[context; hidden]`, and a vocabulary projection. The combiner output is
//! fed back as part of the next decoder input.
//!
//! Inference runs on plain f32 kernels; training builds an autodiff graph
//! per example. Both paths compute the same function.

mod checkpoint;
mod infer;
mod loss;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use infer::{DecoderState, EncodedDocument, StepDistribution, StepOutput};
pub use loss::{build_loss, register_params};
pub use train::TrainConfig;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Per direction; the encoder state is twice this.
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub max_source_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 20_000,
            embed_dim: 128,
            hidden_dim: 256,
            encoder_layers: 2,
            max_source_len: 512,
        }
    }
}

impl ModelConfig {
    pub fn enc_dim(&self) -> usize {
        2 * self.hidden_dim
    }

    /// Decoder hidden size; equal to the encoder state size.
    pub fn dec_dim(&self) -> usize {
        self.enc_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.embed_dim == 0
            || self.hidden_dim == 0
            || self.encoder_layers == 0
            || self.max_source_len == 0
        {
            return Err(Error::invalid(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmIdx {
    pub w: usize,
    pub b: usize,
}

/// Positions of every parameter in the model's flat parameter list.
#[derive(Debug, Clone)]
pub struct Layout {
    pub(crate) src_embed: usize,
    pub(crate) tgt_embed: usize,
    /// `[layer][direction]`, direction 0 = forward.
    pub(crate) encoder: Vec<[LstmIdx; 2]>,
    pub(crate) decoder: LstmIdx,
    pub(crate) init_w: usize,
    pub(crate) init_b: usize,
    pub(crate) attn: usize,
    pub(crate) comb: usize,
    pub(crate) out_w: usize,
    pub(crate) out_b: usize,
}

/// Names and shapes of all parameters, in storage order.
pub(crate) fn param_specs(c: &ModelConfig) -> (Layout, Vec<(String, Vec<usize>)>) {
    let (v, e, h, d) = (c.vocab_size, c.embed_dim, c.hidden_dim, c.dec_dim());
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    let mut add = |name: String, shape: Vec<usize>| {
        specs.push((name, shape));
        specs.len() - 1
    };
    let src_embed = add("src_embed".into(), vec![v, e]);
    let tgt_embed = add("tgt_embed".into(), vec![v, e]);
    let mut encoder = Vec::new();
    for l in 0..c.encoder_layers {
        let input = if l == 0 { e } else { 2 * h };
        let mut pair = [LstmIdx { w: 0, b: 0 }; 2];
        for (dir, name) in ["fwd", "bwd"].iter().enumerate() {
            pair[dir] = LstmIdx {
                w: add(format!("enc.{l}.{name}.w"), vec![input + h, 4 * h]),
                b: add(format!("enc.{l}.{name}.b"), vec![1, 4 * h]),
            };
        }
        encoder.push(pair);
    }
    let decoder = LstmIdx {
        w: add("dec.w".into(), vec![e + d + d, 4 * d]),
        b: add("dec.b".into(), vec![1, 4 * d]),
    };
    let init_w = add("init.w".into(), vec![2 * h, d]);
    let init_b = add("init.b".into(), vec![1, d]);
    let attn = add("attn.w".into(), vec![d, 2 * h]);
    let comb = add("comb.w".into(), vec![2 * h + d, d]);
    let out_w = add("out.w".into(), vec![d, v]);
    let out_b = add("out.b".into(), vec![1, v]);
    (
        Layout {
            src_embed,
            tgt_embed,
            encoder,
            decoder,
            init_w,
            init_b,
            attn,
            comb,
            out_w,
            out_b,
        },
        specs,
    )
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

impl PartialEq for Seq2SeqModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.names == other.names && self.params == other.params
    }
}

impl Seq2SeqModel {
    /// Uniform(-0.1, 0.1) initialization; LSTM forget-gate biases start at 1.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = param_specs(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let n: usize = shape.iter().product();
            let mut data: Vec<f32> = (0..n).map(|_| rng.gen_range(-0.1f32..0.1)).collect();
            if name.ends_with(".b") && (name.starts_with("enc.") || name.starts_with("dec.")) {
                let hid = shape[1] / 4;
                data.iter_mut().for_each(|x| *x = 0.0);
                data[hid..2 * hid].iter_mut().for_each(|x| *x = 1.0);
            }
            params.push(Tensor::new(shape, data)?.with_requires_grad(true));
            names.push(name);
        }
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    pub(crate) fn from_named(config: ModelConfig, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = param_specs(&config);
        let mut params = Vec::with_capacity(specs.len());
        let mut names = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let pos = named
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| Error::invalid(format!("missing parameter {name}")))?;
            let (_, t) = named.swap_remove(pos);
            if t.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "load",
                    format!("{name}: expected {shape:?}, found {:?}", t.shape()),
                ));
            }
            params.push(t.with_requires_grad(true));
            names.push(name);
        }
        if let Some((extra, _)) = named.first() {
            return Err(Error::invalid(format!("unexpected parameter {extra}")));
        }
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.numel()).sum()
    }

    pub(crate) fn p(&self, idx: usize) -> &[f32] {
        self.params[idx].data()
    }
}
