use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bm25::Bm25Index;
use super::metrics::{pessimistic_rank, RetrievalResult};
use super::scorer::RelevanceScorer;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const SOURCES_PER_SET: usize = 10;
pub const DISTRACTORS_PER_SET: usize = 90;

/// One generated question with the passages it is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    pub query_id: String,
    pub method: String,
    pub question: String,
    /// The passages the question was generated from.
    pub sources: Vec<String>,
    /// Retrieved passages, best BM25 score first.
    pub distractors: Vec<String>,
    /// Set when the pool held fewer passages than requested.
    pub small_pool: bool,
}

impl EvaluationSet {
    pub fn len(&self) -> usize {
        self.sources.len() + self.distractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assembles evaluation sets from a passage pool. Retrievals are cached by
/// question, so a question repeated across sets always meets the same
/// retrieved passages.
pub struct EvalSetBuilder<'a> {
    index: &'a Bm25Index,
    pool: &'a [String],
    num_distractors: usize,
    cache: HashMap<Vec<String>, Vec<usize>>,
}

impl<'a> EvalSetBuilder<'a> {
    /// `index` must have been built over `pool`, in the same order.
    pub fn new(index: &'a Bm25Index, pool: &'a [String]) -> Result<Self> {
        if index.num_docs() != pool.len() {
            return Err(Error::invalid(format!(
                "index covers {} passages but the pool has {}",
                index.num_docs(),
                pool.len()
            )));
        }
        Ok(Self {
            index,
            pool,
            num_distractors: DISTRACTORS_PER_SET,
            cache: HashMap::new(),
        })
    }

    pub fn with_distractors(mut self, n: usize) -> Self {
        self.num_distractors = n;
        self.cache.clear();
        self
    }

    /// Top BM25 passages for the question, minus any that repeat a source
    /// passage word for word. Removed passages are not replaced.
    pub fn build(&mut self, query_id: &str, method: &str, question: &str, sources: &[String]) -> Result<EvaluationSet> {
        if sources.is_empty() {
            return Err(Error::invalid(format!("{query_id}: no source passages")));
        }
        if sources.len() != SOURCES_PER_SET {
            log::warn!(
                "{query_id}: {} source passages instead of {SOURCES_PER_SET}",
                sources.len()
            );
        }
        let small_pool = self.pool.len() < self.num_distractors;
        if small_pool {
            log::warn!(
                "pool holds {} passages, fewer than the {} distractors requested",
                self.pool.len(),
                self.num_distractors
            );
        }
        let tokens = tokenize(question);
        let ids = match self.cache.get(&tokens) {
            Some(ids) => ids.clone(),
            None => {
                let ids: Vec<usize> = self
                    .index
                    .top_k(&tokens, self.num_distractors)
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect();
                self.cache.insert(tokens, ids.clone());
                ids
            }
        };
        let distractors = ids
            .into_iter()
            .map(|id| &self.pool[id])
            .filter(|p| !sources.iter().any(|s| s.trim() == p.trim()))
            .cloned()
            .collect();
        Ok(EvaluationSet {
            query_id: query_id.to_string(),
            method: method.to_string(),
            question: question.to_string(),
            sources: sources.to_vec(),
            distractors,
            small_pool,
        })
    }
}

/// Scores every passage against the question, averages the source scores
/// into one combined item and ranks it among the individual distractors.
/// Ties rank the combined item below the distractor.
pub fn score_and_rank(scorer: &dyn RelevanceScorer, set: &EvaluationSet) -> Result<RetrievalResult> {
    if set.sources.is_empty() {
        return Err(Error::invalid(format!("{}: no source passages", set.query_id)));
    }
    let question = tokenize(&set.question);
    let checked = |p: &String| -> Result<f64> {
        let s = scorer.score(&question, p)?;
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(Error::Numeric(format!("relevance score {s} outside [0, 1]")));
        }
        Ok(s)
    };
    let source_scores = set.sources.iter().map(checked).collect::<Result<Vec<_>>>()?;
    let combined = source_scores.iter().sum::<f64>() / source_scores.len() as f64;
    let distractor_scores = set.distractors.iter().map(checked).collect::<Result<Vec<_>>>()?;
    RetrievalResult::from_rank(pessimistic_rank(combined, &distractor_scores))
}

/// One JSON object per line.
pub fn write_eval_sets(path: &Path, sets: &[EvaluationSet]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for s in sets {
        let line = serde_json::to_string(s).expect("evaluation sets serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_eval_sets(path: &Path) -> Result<Vec<EvaluationSet>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
