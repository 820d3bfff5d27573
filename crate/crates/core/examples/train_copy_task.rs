//! Trains a small model to copy its input and reports greedy exact match.
//!
//! cargo run --release --example train_copy_task

use std::time::Instant;

use msqg::decoding::greedy_decode;
use msqg::seq2seq::{ModelConfig, Seq2SeqModel, TrainConfig};
use msqg::synthetic::copy_task;
use msqg::text::EOS;

fn main() -> msqg::Result<()> {
    let vocab = 50;
    let train = copy_task(2000, vocab, 3..=6, 1);
    let held_out = copy_task(200, vocab, 3..=6, 2);
    let config = ModelConfig {
        vocab_size: vocab,
        embed_dim: 32,
        hidden_dim: 32,
        encoder_layers: 2,
        max_source_len: 16,
    };
    let mut model = Seq2SeqModel::new(config, 7)?;
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 16,
        seed: 7,
        lr: 3e-3,
        clip: 5.0,
    };
    let start = Instant::now();
    let trace = model.train(&train, &cfg)?;
    for (i, loss) in trace.iter().enumerate() {
        println!("epoch {:2}  loss {loss:.4}", i + 1);
    }
    let exact = held_out
        .iter()
        .filter(|p| {
            let q = greedy_decode(&model, &p.source, 25).expect("decode");
            q.tokens == [&p.source[..], &[EOS]].concat()
        })
        .count();
    println!(
        "exact match {exact}/{} after {:.1}s",
        held_out.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
