//! Evaluation-set construction, relevance scoring and ranking metrics.

mod bm25;
mod evalset;
mod metrics;
mod scorer;
mod similarity;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

pub use bm25::{Bm25Index, Bm25Params};
pub use evalset::{
    read_eval_sets, score_and_rank, write_eval_sets, EvalSetBuilder, EvaluationSet, DISTRACTORS_PER_SET,
    SOURCES_PER_SET,
};
pub use metrics::{pessimistic_rank, uniform_mrr, RetrievalResult};
pub use scorer::{Bm25Scorer, OracleScorer, RandomScorer, RelevanceScorer};
pub use similarity::{cosine, mean_embedding, mean_pairwise_similarity, Embedder, TfIdfEmbedder};

use crate::decoding::cmp_query_id;
use crate::error::Result;
use crate::tsv;

/// Metrics of one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetResult {
    pub query_id: String,
    pub method: String,
    pub question: String,
    pub result: RetrievalResult,
}

/// Scores every set; `workers > 1` spreads sets over a thread pool. The
/// output is sorted by query id and method whatever the schedule.
pub fn evaluate_sets(scorer: &dyn RelevanceScorer, sets: &[EvaluationSet], workers: usize) -> Result<Vec<SetResult>> {
    let one = |s: &EvaluationSet| -> Result<SetResult> {
        Ok(SetResult {
            query_id: s.query_id.clone(),
            method: s.method.clone(),
            question: s.question.clone(),
            result: score_and_rank(scorer, s)?,
        })
    };
    let mut out = if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| sets.par_iter().map(one).collect::<Result<Vec<_>>>())?
    } else {
        sets.iter().map(one).collect::<Result<Vec<_>>>()?
    };
    out.sort_by(|a, b| cmp_query_id(&a.query_id, &b.query_id).then_with(|| a.method.cmp(&b.method)));
    Ok(out)
}

/// Per-method averages, one row of the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub n_sets: usize,
    pub mean_mrr: f64,
    pub mean_mrr_at_10: f64,
    pub mean_ndcg: f64,
    /// Distinct questions as a percentage of all questions.
    pub pct_unique: f64,
}

/// Groups results by method, in method-name order.
pub fn summarize(results: &[SetResult]) -> Vec<MethodSummary> {
    let mut by_method: BTreeMap<&str, Vec<&SetResult>> = BTreeMap::new();
    for r in results {
        by_method.entry(&r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rs)| {
            let n = rs.len() as f64;
            let mean = |f: fn(&RetrievalResult) -> f64| rs.iter().map(|r| f(&r.result)).sum::<f64>() / n;
            let unique: HashSet<&str> = rs.iter().map(|r| r.question.as_str()).collect();
            MethodSummary {
                method: method.to_string(),
                n_sets: rs.len(),
                mean_mrr: mean(|r| r.mrr),
                mean_mrr_at_10: mean(|r| r.mrr_at_10),
                mean_ndcg: mean(|r| r.ndcg),
                pct_unique: 100.0 * unique.len() as f64 / n,
            }
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 6] = [
    "method",
    "n_sets",
    "mean_MRR",
    "mean_MRR@10",
    "mean_nDCG",
    "pct_unique_questions",
];

pub fn write_report(path: &Path, summaries: &[MethodSummary]) -> Result<()> {
    tsv::write(
        path,
        &REPORT_HEADER,
        summaries.iter().map(|s| {
            vec![
                s.method.clone(),
                s.n_sets.to_string(),
                s.mean_mrr.to_string(),
                s.mean_mrr_at_10.to_string(),
                s.mean_ndcg.to_string(),
                s.pct_unique.to_string(),
            ]
        }),
    )
}

pub const SET_RESULTS_HEADER: [&str; 6] = ["query_id", "method", "rank", "MRR", "MRR@10", "nDCG"];

pub fn write_set_results(path: &Path, results: &[SetResult]) -> Result<()> {
    tsv::write(
        path,
        &SET_RESULTS_HEADER,
        results.iter().map(|r| {
            vec![
                r.query_id.clone(),
                r.method.clone(),
                r.result.rank.to_string(),
                r.result.mrr.to_string(),
                r.result.mrr_at_10.to_string(),
                r.result.ndcg.to_string(),
            ]
        }),
    )
}
