//! Question generation: greedy and beam search on one source, the
//! multi-source aggregate decoder, and the concatenation and shared-encoder
//! baselines.

mod aggregate;
mod multi;
mod search;

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use aggregate::{aggregate, validate_betas, AggregateMode};
pub use multi::{concat_decode, mean_summary, mesd_decode, msqg_decode, MsqgOptions};
pub use search::{beam_decode, greedy_decode, BeamHypothesis};

use crate::error::{Error, Result};
use crate::seq2seq::Seq2SeqModel;
use crate::text::{detokenize, Vocabulary, BOS, EOS, PAD, UNK};
use crate::tsv;

/// PAD and BOS are never generated.
pub(crate) fn allowed(token: usize) -> bool {
    token != PAD && token != BOS
}

/// Whether emitting `token` after `history` would repeat a content token.
/// EOS and UNK may always repeat.
pub(crate) fn repeats(history: &[usize], token: usize) -> bool {
    token != EOS && token != UNK && history.contains(&token)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedQuestion {
    /// Generated ids, ending in EOS unless the length limit was hit.
    pub tokens: Vec<usize>,
    /// Log-probability of `tokens` under the distribution they were chosen from.
    pub log_prob: f64,
    /// Set when repeat masking removed all probability mass and EOS was forced.
    pub truncated: bool,
}

impl GeneratedQuestion {
    /// Tokens before EOS.
    pub fn content(&self) -> &[usize] {
        match self.tokens.iter().position(|&t| t == EOS) {
            Some(i) => &self.tokens[..i],
            None => &self.tokens,
        }
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        detokenize(&vocab.decode(self.content()))
    }
}

/// Every generation strategy exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Greedy decoding of the concatenated documents.
    Greedy,
    S2s,
    S2sRmrep,
    Mesd,
    Msqg,
    MsqgMult,
    MsqgMax,
    MsqgSharedh,
    MsqgSharedhRmrep,
}

impl Method {
    /// The eight compared systems; `greedy` is a reference only.
    pub const COMPARED: [Method; 8] = [
        Method::S2s,
        Method::S2sRmrep,
        Method::Mesd,
        Method::Msqg,
        Method::MsqgMult,
        Method::MsqgMax,
        Method::MsqgSharedh,
        Method::MsqgSharedhRmrep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::S2s => "s2s",
            Method::S2sRmrep => "s2s_rmrep",
            Method::Mesd => "mesd",
            Method::Msqg => "msqg",
            Method::MsqgMult => "msqg_mult",
            Method::MsqgMax => "msqg_max",
            Method::MsqgSharedh => "msqg_sharedh",
            Method::MsqgSharedhRmrep => "msqg_sharedh_rmrep",
        }
    }

    /// Aggregate-decoder settings implied by the method name, if it is one.
    pub fn msqg_options(self, max_len: usize) -> Option<MsqgOptions> {
        let (mode, rmrep, sharedh) = match self {
            Method::Msqg => (AggregateMode::Average, false, false),
            Method::MsqgMult => (AggregateMode::Mult, false, false),
            Method::MsqgMax => (AggregateMode::Max, false, false),
            Method::MsqgSharedh => (AggregateMode::Average, false, true),
            Method::MsqgSharedhRmrep => (AggregateMode::Average, true, true),
            _ => return None,
        };
        Some(MsqgOptions {
            aggregate_mode: mode,
            rmrep,
            sharedh,
            betas: None,
            max_len,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Method::Greedy)
            .chain(Method::COMPARED)
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 5,
            max_len: 25,
        }
    }
}

/// Generates one question from `docs` with the given method.
pub fn generate(
    model: &Seq2SeqModel,
    docs: &[Vec<usize>],
    method: Method,
    cfg: &DecodeConfig,
) -> Result<GeneratedQuestion> {
    match method {
        Method::Greedy => greedy_decode(model, &docs.concat(), cfg.max_len),
        Method::S2s => concat_decode(model, docs, cfg.beam_width, cfg.max_len, false),
        Method::S2sRmrep => concat_decode(model, docs, cfg.beam_width, cfg.max_len, true),
        Method::Mesd => mesd_decode(model, docs, cfg.max_len),
        m => {
            let opts = m
                .msqg_options(cfg.max_len)
                .expect("remaining methods are aggregate decoders");
            msqg_decode(model, docs, &opts)
        }
    }
}

/// Attention weights over `source` positions at each step of decoding
/// `tokens` (teacher-forced, starting from BOS). One row per token.
pub fn attention_trace(model: &Seq2SeqModel, source: &[usize], tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
    let enc = model.encode(source)?;
    let mut state = model.init_decoder(&enc.v)?;
    let mut prev = BOS;
    let mut rows = Vec::with_capacity(tokens.len());
    for &t in tokens {
        let out = model.decode_step_full(&state, prev, &enc.h)?;
        rows.push(out.attention);
        state = out.state;
        prev = t;
    }
    Ok(rows)
}

/// One row of a generations file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub query_id: String,
    pub method: String,
    pub question: String,
}

pub const GENERATIONS_HEADER: [&str; 3] = ["query_id", "method", "generated_question"];

/// Orders query ids numerically when both are integers, else as strings.
pub fn cmp_query_id(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Writes generations sorted by query id, then method.
pub fn write_generations(path: &Path, rows: &[Generation]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| cmp_query_id(&a.query_id, &b.query_id).then_with(|| a.method.cmp(&b.method)));
    tsv::write(
        path,
        &GENERATIONS_HEADER,
        rows.into_iter().map(|g| vec![g.query_id, g.method, g.question]),
    )
}

pub fn read_generations(path: &Path) -> Result<Vec<Generation>> {
    Ok(tsv::read(path, &GENERATIONS_HEADER)?
        .into_iter()
        .map(|(_, mut f)| Generation {
            question: f.pop().unwrap_or_default(),
            method: f.pop().unwrap_or_default(),
            query_id: f.pop().unwrap_or_default(),
        })
        .collect())
}
