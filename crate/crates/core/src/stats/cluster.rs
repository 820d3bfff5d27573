use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    /// Complete linkage: the largest pairwise distance.
    Max,
    /// Mean pairwise distance.
    Average,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Linkage::Max => "max",
            Linkage::Average => "average",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "complete" => Ok(Linkage::Max),
            "average" => Ok(Linkage::Average),
            other => Err(Error::Config(format!("unknown linkage {other:?}"))),
        }
    }
}

/// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    1.0 - (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving cluster, labelled by its smallest point index.
    pub a: usize,
    /// Absorbed cluster, likewise labelled; always `a < b`.
    pub b: usize,
    pub distance: f64,
    /// Points in the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Number of leading merges whose distance is within `threshold`.
    fn merges_within(&self, threshold: f64) -> usize {
        self.merges.iter().take_while(|m| m.distance <= threshold).count()
    }

    pub fn count_at(&self, threshold: f64) -> usize {
        self.n - self.merges_within(threshold)
    }

    /// Cluster label per point, numbered by first appearance.
    pub fn cut(&self, threshold: f64) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for m in &self.merges[..self.merges_within(threshold)] {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[rb.max(ra)] = rb.min(ra);
        }
        let mut labels = vec![usize::MAX; self.n];
        let mut next = 0;
        (0..self.n)
            .map(|i| {
                let r = find(&mut parent, i);
                if labels[r] == usize::MAX {
                    labels[r] = next;
                    next += 1;
                }
                labels[r]
            })
            .collect()
    }

    /// `(threshold, cluster count)` at each threshold given.
    pub fn curve(&self, thresholds: &[f64]) -> Vec<(f64, usize)> {
        thresholds.iter().map(|&t| (t, self.count_at(t))).collect()
    }
}

/// Evenly spaced thresholds from 0 to `max` inclusive.
pub fn threshold_grid(max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| max * i as f64 / steps.max(1) as f64).collect()
}

/// Full agglomerative merge sequence on cosine distance.
///
/// Each round merges the closest pair of live clusters, ties going to the
/// lexicographically smallest `(a, b)`. The merged cluster keeps the smaller
/// label and its distances are updated with the Lance-Williams rule for the
/// chosen linkage.
pub fn dendrogram(vectors: &[Vec<f64>], linkage: Linkage) -> Result<Dendrogram> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::invalid("nothing to cluster"));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::shape("agglomerative_cluster", "vectors differ in dimension"));
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vectors must be finite"));
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&vectors[i], &vectors[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for j in (i + 1..n).filter(|&j| alive[j]) {
                let d = dist[i * n + j];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (a, b, d) = best.expect("at least two live clusters");
        for k in (0..n).filter(|&k| alive[k] && k != a && k != b) {
            let (da, db) = (dist[a * n + k], dist[b * n + k]);
            let merged = match linkage {
                Linkage::Max => da.max(db),
                Linkage::Average => (size[a] as f64 * da + size[b] as f64 * db) / (size[a] + size[b]) as f64,
            };
            dist[a * n + k] = merged;
            dist[k * n + a] = merged;
        }
        alive[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            a,
            b,
            distance: d,
            size: size[a],
        });
    }
    Ok(Dendrogram { n, linkage, merges })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub n_clusters: usize,
    pub dendrogram: Dendrogram,
}

/// Merges clusters while the closest pair is within `threshold`.
pub fn agglomerative_cluster(vectors: &[Vec<f64>], linkage: Linkage, threshold: f64) -> Result<Clustering> {
    let dendrogram = dendrogram(vectors, linkage)?;
    let assignments = dendrogram.cut(threshold);
    Ok(Clustering {
        n_clusters: dendrogram.count_at(threshold),
        assignments,
        dendrogram,
    })
}
