use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{build_loss, register_params};
use super::Seq2SeqModel;
use crate::error::{Error, Result};
use crate::numerics::{clip_grad_norm, AdamState, Graph};
use crate::text::TrainingPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    /// Global gradient-norm bound; non-positive disables clipping.
    pub clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            seed: 7,
            lr: 2e-5,
            clip: 5.0,
        }
    }
}

impl Seq2SeqModel {
    /// Teacher-forced loss of one pair, without touching gradients.
    pub fn loss(&self, pair: &TrainingPair) -> Result<f64> {
        self.check_ids(&pair.source)?;
        self.check_ids(&pair.target)?;
        let mut g = Graph::new();
        let nodes = register_params(&mut g, &self.params)?;
        let root = build_loss(&mut g, &nodes, &self.layout, &self.config, &pair.source, &pair.target)?;
        Ok(g.value(root).data()[0] as f64)
    }

    /// Mini-batch Adam on teacher-forced cross-entropy. Returns the mean loss
    /// per target token for each epoch.
    ///
    /// Each batch loss is the token-weighted mean of the per-pair losses, so
    /// every predicted target position counts equally.
    pub fn train(&mut self, pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Err(Error::invalid("no training pairs"));
        }
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        for p in pairs {
            self.check_ids(&p.source)?;
            self.check_ids(&p.target)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut adam = AdamState::new(cfg.lr);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let (mut total, mut tokens) = (0.0f64, 0usize);
            for batch in order.chunks(cfg.batch_size) {
                let batch_tokens: usize = batch.iter().map(|&i| pairs[i].target.len() - 1).sum();
                self.params.iter_mut().for_each(|p| p.zero_grad());
                for &i in batch {
                    let pair = &pairs[i];
                    let n = pair.target.len() - 1;
                    let (loss, grads) = {
                        let mut g = Graph::new();
                        let nodes = register_params(&mut g, &self.params)?;
                        let root = build_loss(&mut g, &nodes, &self.layout, &self.config, &pair.source, &pair.target)?;
                        (g.value(root).data()[0] as f64, g.backward(root)?)
                    };
                    if !loss.is_finite() {
                        return Err(Error::Numeric(format!(
                            "loss became {loss} in epoch {} on pair {i}",
                            epoch + 1
                        )));
                    }
                    total += loss * n as f64;
                    tokens += n;
                    grads.accumulate_into(&mut self.params, (n as f64 / batch_tokens as f64) as f32)?;
                }
                if cfg.clip > 0.0 {
                    clip_grad_norm(&mut self.params, cfg.clip);
                }
                adam.step(&mut self.params)?;
                if self.params.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "parameters became non-finite in epoch {}",
                        epoch + 1
                    )));
                }
            }
            let mean = total / tokens as f64;
            log::info!("epoch {} mean loss {mean}", epoch + 1);
            trace.push(mean);
        }
        self.params.iter_mut().for_each(|p| p.zero_grad());
        Ok(trace)
    }
}
