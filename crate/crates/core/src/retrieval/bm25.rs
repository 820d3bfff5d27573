use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !self.k1.is_finite() {
            return Err(Error::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Inverted index with Okapi BM25 scoring.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    /// term → (doc id, term frequency), sorted by doc id
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_lens: Vec<usize>,
    avg_len: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>], params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if docs.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for (id, doc) in docs.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in doc {
                *tf.entry(t.as_ref()).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term.to_string()).or_default().push((id, n));
            }
        }
        let doc_lens: Vec<usize> = docs.iter().map(Vec::len).collect();
        let total: usize = doc_lens.iter().sum();
        if total == 0 {
            return Err(Error::invalid("every document in the corpus is empty"));
        }
        Ok(Self {
            postings,
            avg_len: total as f64 / docs.len() as f64,
            doc_lens,
            params,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_len(&self, id: usize) -> usize {
        self.doc_lens[id]
    }

    pub fn postings(&self, term: &str) -> &[(usize, u32)] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// `ln(1 + (N − df + 0.5) / (df + 0.5))`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: f64, len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len as f64 / self.avg_len))
    }

    /// Scores of every indexed document; each query token contributes once
    /// per occurrence.
    pub fn score_all<S: AsRef<str>>(&self, query: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        for t in query {
            let t = t.as_ref();
            let idf = self.idf(t);
            for &(id, tf) in self.postings(t) {
                scores[id] += idf * self.term_weight(tf as f64, self.doc_lens[id]);
            }
        }
        scores
    }

    pub fn score<S: AsRef<str>>(&self, query: &[S], doc_id: usize) -> f64 {
        self.score_all(query)[doc_id]
    }

    /// Scores an arbitrary token sequence against the query using this
    /// index's document frequencies and average length.
    pub fn score_tokens<S: AsRef<str>, P: AsRef<str>>(&self, query: &[S], passage: &[P]) -> f64 {
        query
            .iter()
            .map(|t| {
                let t = t.as_ref();
                let tf = passage.iter().filter(|p| p.as_ref() == t).count();
                if tf == 0 {
                    0.0
                } else {
                    self.idf(t) * self.term_weight(tf as f64, passage.len())
                }
            })
            .sum()
    }

    /// The `k` best documents, by descending score and then ascending id.
    pub fn top_k<S: AsRef<str>>(&self, query: &[S], k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self.score_all(query).into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}
