use std::cmp::Ordering;

use super::{allowed, GeneratedQuestion};
use crate::error::{Error, Result};
use crate::seq2seq::{DecoderState, Seq2SeqModel};
use crate::text::{BOS, EOS};

/// Index of the largest permitted entry; ties go to the lowest id.
/// `None` when every permitted entry is zero.
pub(crate) fn argmax(probs: &[f64], permitted: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &p) in probs.iter().enumerate() {
        if !permitted(i) || !(p > 0.0) {
            continue;
        }
        if best.is_none_or(|b| p > probs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Greedy decoding from one encoded source.
pub(crate) fn greedy_from(
    model: &Seq2SeqModel,
    memory: &[f32],
    mut state: DecoderState,
    max_len: usize,
) -> Result<GeneratedQuestion> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    let mut prev = BOS;
    while tokens.len() < max_len {
        let (dist, next) = model.decode_step(&state, prev, memory)?;
        let tok = argmax(&dist.probs, allowed)
            .ok_or_else(|| Error::DegenerateDistribution("decoder output has no permitted mass".into()))?;
        log_prob += dist.probs[tok].ln();
        tokens.push(tok);
        if tok == EOS {
            break;
        }
        prev = tok;
        state = next;
    }
    Ok(GeneratedQuestion {
        tokens,
        log_prob,
        truncated: false,
    })
}

/// Greedy decoding of a single document.
pub fn greedy_decode(model: &Seq2SeqModel, doc: &[usize], max_len: usize) -> Result<GeneratedQuestion> {
    let enc = model.encode(doc)?;
    let state = model.init_decoder(&enc.v)?;
    greedy_from(model, &enc.h, state, max_len)
}

/// One partial or complete hypothesis of beam search.
#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
}

impl BeamHypothesis {
    /// Length-normalized score `logP / len`.
    pub fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

struct Candidate {
    parent: usize,
    token: usize,
    prob: f64,
    log_prob: f64,
}

/// Orders candidates best first: higher total log-probability, then higher
/// step probability, then lower parent index and token id.
fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then(b.prob.total_cmp(&a.prob))
        .then(a.parent.cmp(&b.parent))
        .then(a.token.cmp(&b.token))
}

/// Beam search over raw log-probabilities.
///
/// Each step keeps the `width` best expansions of the live beam. Expansions
/// ending in EOS leave the beam as finished hypotheses, so the beam shrinks
/// until it is empty or `max_len` is reached; hypotheses still live at that
/// point join the finished pool. The hypothesis with the best `logP / len`
/// is returned. With `rmrep`, each hypothesis may not repeat its own
/// non-special tokens.
pub(crate) fn beam_from(
    model: &Seq2SeqModel,
    memory: &[f32],
    init: DecoderState,
    width: usize,
    max_len: usize,
    rmrep: bool,
) -> Result<GeneratedQuestion> {
    if width == 0 {
        return Err(Error::invalid("beam width must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut live = vec![BeamHypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: init,
        finished: false,
    }];
    let mut pool: Vec<BeamHypothesis> = Vec::new();
    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut states = Vec::with_capacity(live.len());
        let mut candidates = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (dist, next) = model.decode_step(&hyp.state, prev, memory)?;
            for (token, &prob) in dist.probs.iter().enumerate() {
                if !allowed(token) || !(prob > 0.0) || (rmrep && super::repeats(&hyp.tokens, token)) {
                    continue;
                }
                candidates.push(Candidate {
                    parent,
                    token,
                    prob,
                    log_prob: hyp.log_prob + prob.ln(),
                });
            }
            states.push(next);
        }
        candidates.sort_by(candidate_order);
        candidates.truncate(width);
        let mut next_live = Vec::with_capacity(width);
        for c in candidates {
            let mut tokens = live[c.parent].tokens.clone();
            tokens.push(c.token);
            let hyp = BeamHypothesis {
                tokens,
                log_prob: c.log_prob,
                state: states[c.parent].clone(),
                finished: c.token == EOS,
            };
            if hyp.finished {
                pool.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }
    pool.extend(live);
    let best = pool.into_iter().min_by(|a, b| {
        b.score()
            .total_cmp(&a.score())
            .then(b.finished.cmp(&a.finished))
            .then(a.tokens.cmp(&b.tokens))
    });
    Ok(match best {
        Some(h) => GeneratedQuestion {
            tokens: h.tokens,
            log_prob: h.log_prob,
            truncated: false,
        },
        None => GeneratedQuestion {
            tokens: vec![EOS],
            log_prob: f64::NEG_INFINITY,
            truncated: true,
        },
    })
}

/// Length-normalized beam search on a single document.
pub fn beam_decode(
    model: &Seq2SeqModel,
    doc: &[usize],
    beam_width: usize,
    max_len: usize,
) -> Result<GeneratedQuestion> {
    let enc = model.encode(doc)?;
    let state = model.init_decoder(&enc.v)?;
    beam_from(model, &enc.h, state, beam_width, max_len, false)
}
