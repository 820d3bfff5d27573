//! Whole pipeline on the synthetic topic corpus: train, generate with
//! every method, build evaluation sets and score them with BM25.
//!
//! cargo run --release --example end_to_end [output_dir]

use std::path::PathBuf;
use std::time::Instant;

use msqg::cli::{
    cmd_build_evalsets, cmd_evaluate, cmd_generate, cmd_train, EvalInput, EvaluateOptions, MethodChoice, RunConfig,
};
use msqg::retrieval::{summarize, uniform_mrr};
use msqg::synthetic::{topic_corpus, TopicCorpusConfig};
use msqg::text::write_dataset;

fn main() -> msqg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("msqg_end_to_end"), PathBuf::from);
    std::fs::create_dir_all(&out).map_err(|e| msqg::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let dataset = out.join("topics.jsonl");
    write_dataset(&dataset, &topic_corpus(&TopicCorpusConfig::default()))?;

    let cfg = RunConfig {
        dataset: Some(dataset),
        output_dir: out.clone(),
        embed_dim: 32,
        hidden_dim: 32,
        max_source_len: 64,
        epochs: 30,
        batch_size: 16,
        lr: 5e-3,
        method: MethodChoice::All,
        workers: 4,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let ckpt = cmd_train(&cfg)?;
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());
    let gens = cmd_generate(&cfg, &ckpt)?;
    let sets = cmd_build_evalsets(&cfg, &gens)?;
    let results = cmd_evaluate(&cfg, &EvalInput::EvalSets(sets), &EvaluateOptions::default())?;

    println!("uniform baseline MRR {:.4}", uniform_mrr(91));
    for s in summarize(&results) {
        println!(
            "{:20} MRR {:.4}  MRR@10 {:.4}  nDCG {:.4}  unique {:5.1}%",
            s.method, s.mean_mrr, s.mean_mrr_at_10, s.mean_ndcg, s.pct_unique
        );
    }
    println!(
        "outputs in {} after {:.1}s",
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
