//! The three ways of combining per-document next-token distributions.
//!
//! cargo run --example aggregate_voting

use msqg::decoding::{aggregate, AggregateMode};
use msqg::seq2seq::StepDistribution;

fn main() -> msqg::Result<()> {
    let words = ["cucumber", "zucchini", "melon", "squash"];
    let docs = [
        StepDistribution::new(vec![0.60, 0.30, 0.05, 0.05])?,
        StepDistribution::new(vec![0.05, 0.50, 0.40, 0.05])?,
        StepDistribution::new(vec![0.10, 0.45, 0.05, 0.40])?,
    ];
    for betas in [vec![1.0, 1.0, 1.0], vec![2.0, 0.5, 0.5]] {
        println!("betas {betas:?}");
        for mode in [AggregateMode::Average, AggregateMode::Mult, AggregateMode::Max] {
            let p = aggregate(&docs, &betas, mode)?;
            let best = p
                .probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let shown: Vec<String> = p.probs.iter().map(|x| format!("{x:.3}")).collect();
            println!("  {mode:8} [{}] -> {}", shown.join(", "), words[best]);
        }
    }
    Ok(())
}
