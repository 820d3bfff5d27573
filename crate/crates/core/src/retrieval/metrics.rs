use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalResult {
    pub mrr: f64,
    pub mrr_at_10: f64,
    pub ndcg: f64,
    /// 1-based rank of the combined source item.
    pub rank: usize,
}

impl RetrievalResult {
    /// Metrics for a single relevant item at `rank`.
    pub fn from_rank(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("ranks start at 1"));
        }
        let mrr = 1.0 / rank as f64;
        Ok(Self {
            mrr,
            mrr_at_10: if rank <= 10 { mrr } else { 0.0 },
            ndcg: 1.0 / (1.0 + rank as f64).log2(),
            rank,
        })
    }
}

/// Rank of an item scoring `target` among `others`, counting every equal
/// score as ahead of it.
pub fn pessimistic_rank(target: f64, others: &[f64]) -> usize {
    1 + others.iter().filter(|&&s| s >= target).count()
}

/// Expected reciprocal rank when the relevant item is uniformly placed in a
/// list of `n`: `H_n / n`.
pub fn uniform_mrr(n: usize) -> f64 {
    (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64
}
