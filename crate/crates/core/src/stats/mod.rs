//! Two-sample tests, simple regression and agglomerative clustering.

mod cluster;
mod ols;
mod two_sample;

use std::path::Path;

pub use cluster::{
    agglomerative_cluster, cosine_distance, dendrogram, threshold_grid, Clustering, Dendrogram, Linkage, Merge,
};
pub use ols::{ols_fit, pool_attention, OlsFit};
pub use two_sample::{kolmogorov_survival, ks_two_sample, mann_whitney_exact, mann_whitney_u, TestResult, EXACT_MAX_N};

use crate::error::Result;
use crate::tsv;

/// Mann-Whitney tests between every pair of named samples, in input order.
pub fn pairwise_mann_whitney(samples: &[(String, Vec<f64>)]) -> Result<Vec<(String, TestResult)>> {
    let mut out = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let r = mann_whitney_u(&samples[i].1, &samples[j].1)?;
            out.push((format!("{}_vs_{}", samples[i].0, samples[j].0), r));
        }
    }
    Ok(out)
}

pub fn write_test_report(path: &Path, rows: &[(String, TestResult)]) -> Result<()> {
    tsv::write(
        path,
        &["pair", "U", "z", "p"],
        rows.iter().map(|(pair, r)| {
            vec![
                pair.clone(),
                r.statistic.to_string(),
                r.z.map_or_else(|| "NA".to_string(), |z| z.to_string()),
                r.p_two_sided.to_string(),
            ]
        }),
    )
}

pub fn write_curve(path: &Path, curve: &[(f64, usize)]) -> Result<()> {
    tsv::write(
        path,
        &["threshold", "n_clusters"],
        curve.iter().map(|(t, c)| vec![t.to_string(), c.to_string()]),
    )
}

pub fn write_assignments(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    tsv::write(
        path,
        &["query_id", "cluster"],
        ids.iter().zip(labels).map(|(id, c)| vec![id.clone(), c.to_string()]),
    )
}

pub fn write_dendrogram(path: &Path, d: &Dendrogram) -> Result<()> {
    tsv::write(
        path,
        &["step", "a", "b", "distance", "size"],
        d.merges.iter().enumerate().map(|(i, m)| {
            vec![
                (i + 1).to_string(),
                m.a.to_string(),
                m.b.to_string(),
                m.distance.to_string(),
                m.size.to_string(),
            ]
        }),
    )
}

pub fn write_ols(path: &Path, fit: &OlsFit) -> Result<()> {
    tsv::write(
        path,
        &[
            "n",
            "slope",
            "intercept",
            "slope_ci_lo",
            "slope_ci_hi",
            "slope_p",
            "intercept_p",
            "ci_contains_zero",
        ],
        [vec![
            fit.n.to_string(),
            fit.slope.to_string(),
            fit.intercept.to_string(),
            fit.slope_ci_95.0.to_string(),
            fit.slope_ci_95.1.to_string(),
            fit.slope_p.to_string(),
            fit.intercept_p.to_string(),
            fit.slope_ci_contains_zero().to_string(),
        ]],
    )
}

#[cfg(test)]
mod tests;
