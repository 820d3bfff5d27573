use super::{LstmIdx, Seq2SeqModel};
use crate::error::{Error, Result};
use crate::numerics::kernels::{affine, sigmoid};
use crate::numerics::Real;

/// Encoder output for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDocument {
    /// `len × enc_dim`, row-major: top-layer states of both directions per token.
    pub h: Vec<f32>,
    pub len: usize,
    /// Forward-final and backward-final top-layer states, concatenated.
    pub v: Vec<f32>,
}

impl EncodedDocument {
    pub fn enc_dim(&self) -> usize {
        self.v.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.enc_dim();
        &self.h[i * d..(i + 1) * d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f32>,
    pub cell: Vec<f32>,
    /// Previous attentional (combiner) output.
    pub feed: Vec<f32>,
}

/// Next-token distribution of one decoder at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub probs: Vec<f64>,
}

impl StepDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("distribution has negative or non-finite entries"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("distribution sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub dist: StepDistribution,
    pub state: DecoderState,
    /// Attention weights over the memory rows.
    pub attention: Vec<f64>,
}

fn lstm_cell(x: &[f32], h: &[f32], c: &[f32], w: &[f32], b: &[f32]) -> (Vec<f32>, Vec<f32>) {
    let hid = h.len();
    let mut xh = Vec::with_capacity(x.len() + hid);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h);
    let gates = affine(&xh, w, Some(b), 4 * hid);
    let mut new_h = vec![0.0; hid];
    let mut new_c = vec![0.0; hid];
    for k in 0..hid {
        let i = sigmoid(gates[k]);
        let f = sigmoid(gates[hid + k]);
        let g = gates[2 * hid + k].tanh();
        let o = sigmoid(gates[3 * hid + k]);
        new_c[k] = f * c[k] + i * g;
        new_h[k] = o * new_c[k].tanh();
    }
    (new_h, new_c)
}

impl Seq2SeqModel {
    fn run_lstm(&self, idx: LstmIdx, inputs: &[Vec<f32>], reverse: bool, hid: usize) -> Vec<Vec<f32>> {
        let (w, b) = (self.p(idx.w), self.p(idx.b));
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        let mut out = vec![Vec::new(); inputs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..inputs.len()).rev())
        } else {
            Box::new(0..inputs.len())
        };
        for t in order {
            let (nh, nc) = lstm_cell(&inputs[t], &h, &c, w, b);
            out[t] = nh.clone();
            h = nh;
            c = nc;
        }
        out
    }

    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Encodes a document, truncated to `max_source_len` tokens.
    pub fn encode(&self, ids: &[usize]) -> Result<EncodedDocument> {
        if ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty document"));
        }
        self.check_ids(ids)?;
        let ids = &ids[..ids.len().min(self.config.max_source_len)];
        let (e, hid) = (self.config.embed_dim, self.config.hidden_dim);
        let emb = self.p(self.layout.src_embed);
        let mut layer_in: Vec<Vec<f32>> = ids.iter().map(|&i| emb[i * e..(i + 1) * e].to_vec()).collect();
        let mut fwd_final = Vec::new();
        let mut bwd_final = Vec::new();
        for pair in &self.layout.encoder {
            let fwd = self.run_lstm(pair[0], &layer_in, false, hid);
            let bwd = self.run_lstm(pair[1], &layer_in, true, hid);
            fwd_final = fwd[fwd.len() - 1].clone();
            bwd_final = bwd[0].clone();
            layer_in = fwd
                .into_iter()
                .zip(bwd)
                .map(|(mut f, b)| {
                    f.extend_from_slice(&b);
                    f
                })
                .collect();
        }
        let len = layer_in.len();
        let mut v = fwd_final;
        v.extend_from_slice(&bwd_final);
        Ok(EncodedDocument {
            h: layer_in.concat(),
            len,
            v,
        })
    }

    /// Initial decoder state from a summary vector: `hidden = v·W + b`,
    /// zero cell and zero input feed.
    pub fn init_decoder(&self, v: &[f32]) -> Result<DecoderState> {
        if v.len() != self.config.enc_dim() {
            return Err(Error::shape(
                "init_decoder",
                format!("summary has {} dims, expected {}", v.len(), self.config.enc_dim()),
            ));
        }
        let d = self.config.dec_dim();
        let hidden = affine(v, self.p(self.layout.init_w), Some(self.p(self.layout.init_b)), d);
        Ok(DecoderState {
            hidden,
            cell: vec![0.0; d],
            feed: vec![0.0; d],
        })
    }

    pub fn decode_step(
        &self,
        state: &DecoderState,
        prev_token: usize,
        memory: &[f32],
    ) -> Result<(StepDistribution, DecoderState)> {
        let out = self.decode_step_full(state, prev_token, memory)?;
        Ok((out.dist, out.state))
    }

    /// One decoder step attending over `memory`, a row-major matrix of
    /// encoder states (any number of rows).
    pub fn decode_step_full(&self, state: &DecoderState, prev_token: usize, memory: &[f32]) -> Result<StepOutput> {
        let cfg = &self.config;
        let (d, enc) = (cfg.dec_dim(), cfg.enc_dim());
        if prev_token >= cfg.vocab_size {
            return Err(Error::invalid(format!("token id {prev_token} outside vocabulary")));
        }
        if state.hidden.len() != d || state.cell.len() != d || state.feed.len() != d {
            return Err(Error::shape("decode_step", "decoder state does not match the model"));
        }
        if memory.is_empty() || !memory.len().is_multiple_of(enc) {
            return Err(Error::shape(
                "decode_step",
                format!("memory of {} values is not a non-empty multiple of {enc}", memory.len()),
            ));
        }
        let e = cfg.embed_dim;
        let emb = self.p(self.layout.tgt_embed);
        let mut x = Vec::with_capacity(e + d);
        x.extend_from_slice(&emb[prev_token * e..(prev_token + 1) * e]);
        x.extend_from_slice(&state.feed);
        let dec = self.layout.decoder;
        let (h, c) = lstm_cell(&x, &state.hidden, &state.cell, self.p(dec.w), self.p(dec.b));

        let attention = attention_weights(&affine(&h, self.p(self.layout.attn), None, enc), memory);
        let context = weighted_rows(&attention, memory, enc);

        let mut comb_in = context;
        comb_in.extend_from_slice(&h);
        let mut comb = affine(&comb_in, self.p(self.layout.comb), None, d);
        comb.iter_mut().for_each(|x| *x = x.max(0.0));
        let logits = affine(
            &comb,
            self.p(self.layout.out_w),
            Some(self.p(self.layout.out_b)),
            cfg.vocab_size,
        );
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("decode_step"));
        }
        let probs = crate::numerics::softmax(&logits.iter().map(|&x| x as f64).collect::<Vec<_>>())?;
        Ok(StepOutput {
            dist: StepDistribution { probs },
            state: DecoderState {
                hidden: h,
                cell: c,
                feed: comb,
            },
            attention,
        })
    }
}

/// Softmax over `query · row_j`, accumulated in f64.
pub(crate) fn attention_weights(query: &[f32], memory: &[f32]) -> Vec<f64> {
    let dim = query.len();
    let scores: Vec<f64> = memory
        .chunks_exact(dim)
        .map(|row| row.iter().zip(query).map(|(&a, &b)| a.to_f64() * b.to_f64()).sum())
        .collect();
    crate::numerics::softmax_f64(&scores)
}

pub(crate) fn weighted_rows(weights: &[f64], memory: &[f32], dim: usize) -> Vec<f32> {
    let mut acc = vec![0.0f64; dim];
    for (w, row) in weights.iter().zip(memory.chunks_exact(dim)) {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += w * x as f64;
        }
    }
    acc.into_iter().map(|x| x as f32).collect()
}
