//! Seeded toy data: a sequence-copy task and a small multi-topic
//! passage corpus in the dataset format.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::{tokenize, DataInstance, Passage, TrainingPair, BOS, EOS, NUM_RESERVED};

/// Pairs whose target is the source itself. Tokens are drawn uniformly
/// from the non-reserved ids below `vocab_size`.
pub fn copy_task(n: usize, vocab_size: usize, len: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<TrainingPair> {
    assert!(vocab_size > NUM_RESERVED, "vocabulary has no content tokens");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let l = rng.gen_range(len.clone());
            let source: Vec<usize> = (0..l).map(|_| rng.gen_range(NUM_RESERVED..vocab_size)).collect();
            let mut target = Vec::with_capacity(l + 2);
            target.push(BOS);
            target.extend(&source);
            target.push(EOS);
            TrainingPair { source, target }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpusConfig {
    pub topics: usize,
    pub instances_per_topic: usize,
    pub passages_per_instance: usize,
    /// Distinct filler words per topic.
    pub topic_vocab: usize,
    pub passage_len: usize,
    /// Passages per instance marked as selected.
    pub selected: usize,
    pub seed: u64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        Self {
            topics: 3,
            instances_per_topic: 10,
            passages_per_instance: 10,
            topic_vocab: 40,
            passage_len: 12,
            selected: 10,
            seed: 7,
        }
    }
}

const TOPIC_NAMES: [&str; 6] = ["astronomy", "cooking", "finance", "geology", "music", "sailing"];

fn topic_name(t: usize) -> String {
    match TOPIC_NAMES.get(t) {
        Some(n) => n.to_string(),
        None => format!("topic{t}"),
    }
}

/// Instances of same-topic passages. Every passage of an instance carries
/// the instance keyword among topic filler words, and the query asks about
/// that keyword, so a good question singles out its own passages.
pub fn topic_corpus(cfg: &TopicCorpusConfig) -> Vec<DataInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for t in 0..cfg.topics {
        let name = topic_name(t);
        let words: Vec<String> = (0..cfg.topic_vocab).map(|w| format!("{name}{w}")).collect();
        for i in 0..cfg.instances_per_topic {
            let id = t * cfg.instances_per_topic + i;
            let keyword = format!("key{id:03}");
            let passages = (0..cfg.passages_per_instance)
                .map(|p| {
                    let mut tokens: Vec<String> = (0..cfg.passage_len.saturating_sub(1))
                        .map(|_| words.choose(&mut rng).expect("topic vocabulary").clone())
                        .collect();
                    let at = rng.gen_range(0..=tokens.len());
                    tokens.insert(at, keyword.clone());
                    let text = tokens.join(" ");
                    Passage {
                        tokens: tokenize(&text),
                        text,
                        is_selected: p < cfg.selected,
                    }
                })
                .collect();
            let query_text = format!("what is {keyword} in {name}");
            out.push(DataInstance {
                query_id: id.to_string(),
                query: tokenize(&query_text),
                query_text,
                passages,
            });
        }
    }
    out
}
