//! Clusters passage sets by their mean tf-idf vector and prints how the
//! cluster count falls as the distance threshold grows.
//!
//! cargo run --example cluster_passage_sets

use msqg::retrieval::{mean_embedding, mean_pairwise_similarity, TfIdfEmbedder};
use msqg::stats::{agglomerative_cluster, threshold_grid, Linkage};
use msqg::synthetic::{topic_corpus, TopicCorpusConfig};

fn main() -> msqg::Result<()> {
    let data = topic_corpus(&TopicCorpusConfig::default());
    let sets: Vec<Vec<Vec<String>>> = data
        .iter()
        .map(|d| d.passages.iter().map(|p| p.tokens.clone()).collect())
        .collect();
    let corpus: Vec<Vec<String>> = sets.iter().flatten().cloned().collect();
    let embedder = TfIdfEmbedder::fit(&corpus)?;

    let within = sets
        .iter()
        .map(|s| mean_pairwise_similarity(s, &embedder))
        .collect::<msqg::Result<Vec<_>>>()?;
    println!(
        "mean within-set similarity {:.3}",
        within.iter().sum::<f64>() / within.len() as f64
    );

    let vectors = sets
        .iter()
        .map(|s| mean_embedding(s, &embedder))
        .collect::<msqg::Result<Vec<_>>>()?;
    for linkage in [Linkage::Max, Linkage::Average] {
        let c = agglomerative_cluster(&vectors, linkage, 0.5)?;
        println!(
            "\n{linkage} linkage: {} clusters at 0.5, labels {:?}",
            c.n_clusters, c.assignments
        );
        for (t, n) in c.dendrogram.curve(&threshold_grid(1.0, 10)) {
            println!("  threshold {t:.1}  clusters {n}");
        }
    }
    Ok(())
}
