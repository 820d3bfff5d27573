use super::aggregate::{aggregate, validate_betas, AggregateMode};
use super::search::{argmax, beam_from, greedy_from};
use super::{allowed, repeats, GeneratedQuestion};
use crate::error::{Error, Result};
use crate::seq2seq::{EncodedDocument, Seq2SeqModel};
use crate::text::{BOS, EOS};

#[derive(Debug, Clone, PartialEq)]
pub struct MsqgOptions {
    pub aggregate_mode: AggregateMode,
    pub rmrep: bool,
    pub sharedh: bool,
    /// Per-document weights summing to `N`; `None` weights all equally.
    pub betas: Option<Vec<f64>>,
    pub max_len: usize,
}

impl Default for MsqgOptions {
    fn default() -> Self {
        Self {
            aggregate_mode: AggregateMode::Average,
            rmrep: false,
            sharedh: false,
            betas: None,
            max_len: 25,
        }
    }
}

fn check_docs(docs: &[Vec<usize>]) -> Result<()> {
    if docs.is_empty() {
        return Err(Error::invalid("no source documents"));
    }
    if docs.iter().any(|d| d.is_empty()) {
        return Err(Error::invalid("empty source document"));
    }
    Ok(())
}

/// Elementwise mean of the summary vectors, independent of their order.
///
/// Each coordinate is the minimum plus the mean of the sorted offsets from
/// that minimum, so identical inputs give back their common value exactly.
pub fn mean_summary(encoded: &[EncodedDocument]) -> Result<Vec<f32>> {
    let first = encoded
        .first()
        .ok_or_else(|| Error::invalid("no encodings to average"))?;
    let dim = first.v.len();
    if encoded.iter().any(|e| e.v.len() != dim) {
        return Err(Error::shape("mean_summary", "summary vectors differ in size"));
    }
    let n = encoded.len() as f64;
    Ok((0..dim)
        .map(|k| {
            let mut xs: Vec<f64> = encoded.iter().map(|e| e.v[k] as f64).collect();
            xs.sort_by(f64::total_cmp);
            let pivot = xs[0];
            let offset: f64 = xs.iter().map(|x| x - pivot).sum();
            (pivot + offset / n) as f32
        })
        .collect())
}

/// Decodes one question shared by all documents.
///
/// Every document keeps its own decoder and attention memory. At each step
/// the per-decoder distributions are aggregated, optionally masked for
/// repeats, and the single argmax token is fed back to every decoder.
pub fn msqg_decode(model: &Seq2SeqModel, docs: &[Vec<usize>], opts: &MsqgOptions) -> Result<GeneratedQuestion> {
    check_docs(docs)?;
    if opts.max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let n = docs.len();
    let betas = opts.betas.clone().unwrap_or_else(|| vec![1.0; n]);
    validate_betas(&betas, n)?;
    let encoded = docs.iter().map(|d| model.encode(d)).collect::<Result<Vec<_>>>()?;
    let mut states = if opts.sharedh {
        let v = mean_summary(&encoded)?;
        let s = model.init_decoder(&v)?;
        vec![s; n]
    } else {
        encoded
            .iter()
            .map(|e| model.init_decoder(&e.v))
            .collect::<Result<Vec<_>>>()?
    };

    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    let mut prev = BOS;
    while tokens.len() < opts.max_len {
        let mut dists = Vec::with_capacity(n);
        for (state, enc) in states.iter_mut().zip(&encoded) {
            let (d, next) = model.decode_step(state, prev, &enc.h)?;
            dists.push(d);
            *state = next;
        }
        let agg = aggregate(&dists, &betas, opts.aggregate_mode)?;
        let permitted = |t: usize| allowed(t) && !(opts.rmrep && repeats(&tokens, t));
        let Some(tok) = argmax(&agg.probs, permitted) else {
            tokens.push(EOS);
            return Ok(GeneratedQuestion {
                tokens,
                log_prob: f64::NEG_INFINITY,
                truncated: true,
            });
        };
        let mass: f64 = (0..agg.len()).filter(|&t| permitted(t)).map(|t| agg.probs[t]).sum();
        log_prob += (agg.probs[tok] / mass).ln();
        tokens.push(tok);
        if tok == EOS {
            break;
        }
        prev = tok;
    }
    Ok(GeneratedQuestion {
        tokens,
        log_prob,
        truncated: false,
    })
}

/// S2S baseline: the documents are joined in the given order and decoded
/// with beam search as one source.
pub fn concat_decode(
    model: &Seq2SeqModel,
    docs: &[Vec<usize>],
    beam_width: usize,
    max_len: usize,
    rmrep: bool,
) -> Result<GeneratedQuestion> {
    check_docs(docs)?;
    let enc = model.encode(&docs.concat())?;
    let state = model.init_decoder(&enc.v)?;
    beam_from(model, &enc.h, state, beam_width, max_len, rmrep)
}

/// MESD baseline: one decoder started from the mean summary vector and
/// attending over the rows of every document, decoded greedily.
///
/// Documents are put in a canonical order before their rows are stacked so
/// the output does not depend on input order.
pub fn mesd_decode(model: &Seq2SeqModel, docs: &[Vec<usize>], max_len: usize) -> Result<GeneratedQuestion> {
    check_docs(docs)?;
    let mut ordered: Vec<&Vec<usize>> = docs.iter().collect();
    ordered.sort();
    let encoded = ordered.iter().map(|d| model.encode(d)).collect::<Result<Vec<_>>>()?;
    let v = mean_summary(&encoded)?;
    let memory: Vec<f32> = encoded.iter().flat_map(|e| e.h.iter().copied()).collect();
    let state = model.init_decoder(&v)?;
    greedy_from(model, &memory, state, max_len)
}
