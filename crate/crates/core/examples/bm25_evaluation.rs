//! Builds evaluation sets around a few hand-written questions and ranks
//! their source passages against BM25-retrieved distractors.
//!
//! cargo run --example bm25_evaluation

use msqg::retrieval::{
    evaluate_sets, summarize, uniform_mrr, Bm25Index, Bm25Params, Bm25Scorer, EvalSetBuilder, OracleScorer,
    RandomScorer,
};
use msqg::synthetic::{topic_corpus, TopicCorpusConfig};
use msqg::text::tokenize;

fn main() -> msqg::Result<()> {
    let data = topic_corpus(&TopicCorpusConfig::default());
    let pool: Vec<String> = data
        .iter()
        .flat_map(|d| d.passages.iter().map(|p| p.text.clone()))
        .collect();
    let docs: Vec<Vec<String>> = pool.iter().map(|p| tokenize(p)).collect();
    let index = Bm25Index::build(&docs, Bm25Params::default())?;
    println!("{} passages, average length {:.1}", index.num_docs(), index.avg_len());

    let mut builder = EvalSetBuilder::new(&index, &pool)?;
    let mut sets = Vec::new();
    for inst in data.iter().step_by(3) {
        let sources: Vec<String> = inst.passages.iter().map(|p| p.text.clone()).collect();
        let keyword = &inst.query[2];
        let topic = inst.query.last().map(String::as_str).unwrap_or("");
        sets.push(builder.build(&inst.query_id, "keyword", &format!("what is {keyword}"), &sources)?);
        sets.push(builder.build(&inst.query_id, "topic_only", &format!("what is in {topic}"), &sources)?);
        sets.push(builder.build(&inst.query_id, "empty", "", &sources)?);
    }
    println!(
        "{} sets; the first ranks its sources against {} distractors",
        sets.len(),
        sets[0].distractors.len()
    );

    let bm25 = Bm25Scorer::new(&index);
    let random = RandomScorer { seed: 1 };
    let oracle = OracleScorer::new(
        data.iter()
            .step_by(3)
            .flat_map(|d| d.passages.iter().map(|p| p.text.clone())),
    );
    println!("uniform-random expectation {:.4}", uniform_mrr(91));
    for (name, results) in [
        ("bm25", evaluate_sets(&bm25, &sets, 4)?),
        ("random", evaluate_sets(&random, &sets, 1)?),
        ("oracle", evaluate_sets(&oracle, &sets, 1)?),
    ] {
        for s in summarize(&results) {
            println!(
                "{name:7} {:10} MRR {:.4}  MRR@10 {:.4}  nDCG {:.4}",
                s.method, s.mean_mrr, s.mean_mrr_at_10, s.mean_ndcg
            );
        }
    }
    Ok(())
}
