use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use super::bm25::Bm25Index;
use crate::error::Result;
use crate::text::tokenize;

/// Scores how well a passage answers a question, in `[0, 1]`.
pub trait RelevanceScorer: Sync {
    fn score(&self, question: &[String], passage: &str) -> Result<f64>;
}

/// BM25 of `(question, passage)`, z-scored against the question's BM25
/// scores over the whole pool and squashed with the logistic function.
pub struct Bm25Scorer<'a> {
    index: &'a Bm25Index,
    /// question → (mean, std) over the pool
    stats: Mutex<HashMap<Vec<String>, (f64, f64)>>,
}

impl<'a> Bm25Scorer<'a> {
    pub fn new(index: &'a Bm25Index) -> Self {
        Self {
            index,
            stats: Mutex::new(HashMap::new()),
        }
    }

    fn pool_stats(&self, question: &[String]) -> (f64, f64) {
        if let Some(&s) = self.stats.lock().expect("stats lock").get(question) {
            return s;
        }
        let scores = self.index.score_all(question);
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let s = (mean, var.sqrt());
        self.stats.lock().expect("stats lock").insert(question.to_vec(), s);
        s
    }
}

impl RelevanceScorer for Bm25Scorer<'_> {
    fn score(&self, question: &[String], passage: &str) -> Result<f64> {
        let raw = self.index.score_tokens(question, &tokenize(passage));
        let (mean, std) = self.pool_stats(question);
        let z = if std > 0.0 { (raw - mean) / std } else { 0.0 };
        Ok(1.0 / (1.0 + (-z).exp()))
    }
}

/// Scores passages in a known relevant set above everything else.
pub struct OracleScorer {
    relevant: HashSet<String>,
}

impl OracleScorer {
    pub fn new<I: IntoIterator<Item = String>>(relevant: I) -> Self {
        Self {
            relevant: relevant.into_iter().collect(),
        }
    }
}

impl RelevanceScorer for OracleScorer {
    fn score(&self, _question: &[String], passage: &str) -> Result<f64> {
        Ok(if self.relevant.contains(passage) { 0.9 } else { 0.1 })
    }
}

/// Uniform pseudo-random scores, a fixed function of seed, question and passage.
pub struct RandomScorer {
    pub seed: u64,
}

impl RelevanceScorer for RandomScorer {
    fn score(&self, question: &[String], passage: &str) -> Result<f64> {
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        question.hash(&mut h);
        passage.hash(&mut h);
        // 53 random bits mapped to the open interval (0, 1).
        Ok(((h.finish() >> 11) as f64 + 0.5) / (1u64 << 53) as f64)
    }
}
