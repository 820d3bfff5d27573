use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Maps a token sequence to a dense vector.
pub trait Embedder: Sync {
    fn embed(&self, tokens: &[String]) -> Vec<f64>;
}

/// L2-normalized tf-idf with smoothed `idf = ln((1 + N) / (1 + df)) + 1`.
/// Terms outside the fitted vocabulary are ignored.
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    index: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfEmbedder {
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot fit tf-idf on an empty corpus"));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in corpus {
            let mut terms: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut index = HashMap::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, d)) in df.into_iter().enumerate() {
            index.insert(term.to_string(), i);
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
        }
        Ok(Self { index, idf })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }
}

impl Embedder for TfIdfEmbedder {
    fn embed(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for t in tokens {
            if let Some(&i) = self.index.get(t) {
                v[i] += self.idf[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Mean cosine similarity over all unordered pairs of passages. Pairs with
/// a zero embedding are skipped.
pub fn mean_pairwise_similarity(passages: &[Vec<String>], embedder: &dyn Embedder) -> Result<f64> {
    if passages.len() < 2 {
        return Err(Error::invalid("similarity needs at least two passages"));
    }
    let vecs: Vec<Vec<f64>> = passages.iter().map(|p| embedder.embed(p)).collect();
    let (mut total, mut pairs, mut skipped) = (0.0, 0usize, 0usize);
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            match cosine(&vecs[i], &vecs[j]) {
                Some(c) => {
                    total += c;
                    pairs += 1;
                }
                None => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} passage pairs with an empty embedding");
    }
    if pairs == 0 {
        return Err(Error::invalid("no passage pair has non-zero embeddings"));
    }
    Ok(total / pairs as f64)
}

/// Mean of the embeddings of a passage set.
pub fn mean_embedding(passages: &[Vec<String>], embedder: &dyn Embedder) -> Result<Vec<f64>> {
    let first = passages.first().ok_or_else(|| Error::invalid("no passages to embed"))?;
    let mut acc = embedder.embed(first);
    for p in &passages[1..] {
        for (a, x) in acc.iter_mut().zip(embedder.embed(p)) {
            *a += x;
        }
    }
    let n = passages.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}
