//! Common question generation from multiple documents.
//!
//! A single-document sequence-to-sequence question generator is trained on
//! (passage, query) pairs. At test time the same model decodes one shared
//! question from N documents: every document drives its own decoder, the N
//! next-token distributions are combined into one, and the chosen token is
//! fed back to all decoders. Generations are scored by how well they retrieve
//! their source passages against BM25-retrieved distractors.
//!
//! Module map:
//!
//! - [`numerics`]: tensors, reverse-mode autodiff, Adam
//! - [`text`]: tokenization, vocabulary, JSON Lines datasets
//! - [`seq2seq`]: bidirectional LSTM encoder, attentional decoder, training, checkpoints
//! - [`decoding`]: greedy, beam, multi-source decoding and the baselines
//! - [`retrieval`]: BM25, evaluation sets, relevance scorers, MRR / nDCG
//! - [`stats`]: Mann-Whitney, Kolmogorov-Smirnov, OLS, agglomerative clustering
//! - [`cli`]: configuration and the pipeline commands behind the `msqg` binary
//! - [`synthetic`]: toy corpora used by the examples and tests

pub mod cli;
pub mod decoding;
mod error;
pub mod numerics;
pub mod retrieval;
pub mod seq2seq;
pub mod stats;
pub mod synthetic;
pub mod text;
mod tsv;

pub use error::{Error, Result};
