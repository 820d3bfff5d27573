//! Trains on the topic corpus, then decodes one question per passage set
//! with every method and prints them side by side.
//!
//! cargo run --release --example multi_source_decode

use msqg::decoding::{generate, DecodeConfig, Method};
use msqg::seq2seq::{ModelConfig, Seq2SeqModel, TrainConfig};
use msqg::synthetic::{topic_corpus, TopicCorpusConfig};
use msqg::text::{training_pairs, training_sequences, Vocabulary};

fn main() -> msqg::Result<()> {
    let data = topic_corpus(&TopicCorpusConfig::default());
    let vocab = Vocabulary::build(training_sequences(&data), 20_000, 2)?;
    let pairs = training_pairs(&data, &vocab);
    let mut model = Seq2SeqModel::new(
        ModelConfig {
            vocab_size: vocab.len(),
            embed_dim: 32,
            hidden_dim: 32,
            encoder_layers: 2,
            max_source_len: 64,
        },
        7,
    )?;
    let trace = model.train(
        &pairs,
        &TrainConfig {
            epochs: 30,
            batch_size: 16,
            lr: 5e-3,
            ..TrainConfig::default()
        },
    )?;
    println!(
        "{} pairs, final loss {:.4}",
        pairs.len(),
        trace.last().copied().unwrap_or(f64::NAN)
    );

    let cfg = DecodeConfig::default();
    for inst in data.iter().step_by(7) {
        let docs: Vec<Vec<usize>> = inst.passages.iter().map(|p| vocab.encode(&p.tokens)).collect();
        println!("\n{} (reference: {})", inst.query_id, inst.query_text);
        for method in std::iter::once(Method::Greedy).chain(Method::COMPARED) {
            let q = generate(&model, &docs, method, &cfg)?;
            println!("  {:20} {}", method.name(), q.to_text(&vocab));
        }
    }
    Ok(())
}
