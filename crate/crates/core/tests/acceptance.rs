//! Acceptance criteria. Each check prints one PASS/FAIL line; the process
//! fails if any check fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use msqg::cli::{
    cmd_analyze, cmd_build_evalsets, cmd_evaluate, cmd_generate, cmd_train, Analysis, EvalInput, EvaluateOptions,
    MethodChoice, RunConfig,
};
use msqg::decoding::{
    aggregate, beam_decode, concat_decode, greedy_decode, msqg_decode, AggregateMode, Method, MsqgOptions,
};
use msqg::numerics::gradcheck::check_gradients;
use msqg::numerics::{Axis, Graph, NodeId, Tensor};
use msqg::retrieval::{
    score_and_rank, summarize, uniform_mrr, Bm25Index, Bm25Params, EvaluationSet, RelevanceScorer, RetrievalResult,
};
use msqg::seq2seq::{build_loss, ModelConfig, Seq2SeqModel, StepDistribution, TrainConfig};
use msqg::stats::{
    agglomerative_cluster, cosine_distance, ks_two_sample, mann_whitney_exact, mann_whitney_u, ols_fit, Linkage,
};
use msqg::synthetic::{copy_task, topic_corpus, TopicCorpusConfig};
use msqg::text::{tokenize, write_dataset, BOS, EOS, UNK};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn peaky_model(vocab: usize, seed: u64) -> Seq2SeqModel {
    let cfg = ModelConfig {
        vocab_size: vocab,
        embed_dim: 6,
        hidden_dim: 5,
        encoder_layers: 2,
        max_source_len: 40,
    };
    let mut m = Seq2SeqModel::new(cfg, seed).unwrap();
    for p in m.params_mut() {
        let d = p.data().iter().map(|x| x * 8.0).collect();
        p.set_data(d).unwrap();
    }
    m
}

fn random_doc(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<usize> {
    let len = rng.gen_range(1..=8);
    (0..len).map(|_| rng.gen_range(4..vocab)).collect()
}

// 1. Gradient correctness

fn rand_t(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    let data = (0..r * c)
        .map(|_| {
            let x: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                x
            } else {
                -x
            }
        })
        .collect();
    Tensor::new(vec![r, c], data).unwrap()
}

fn weighted_sum(g: &mut Graph<'_, f64>, x: NodeId, seed: u64) -> msqg::Result<NodeId> {
    let shape = g.value(x).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product::<usize>();
    let w = g.input(Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?)?;
    let p = g.mul(x, w)?;
    g.sum(p)
}

type Build = Box<dyn Fn(&mut Graph<'_, f64>, &[NodeId]) -> msqg::Result<NodeId>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor<f64>>, Build)> {
    let mut d = || rng.gen_range(1..=6usize);
    let (m, k, n) = (d(), d(), d());
    let (a, b) = (d(), d());
    let mut rng2 = ChaCha8Rng::seed_from_u64(m as u64 * 100 + n as u64);
    let r = &mut rng2;
    let ids: Vec<usize> = (0..k).map(|_| r.gen_range(0..m)).collect();
    let targets: Vec<usize> = (0..k).map(|_| r.gen_range(0..n)).collect();
    let targets2 = targets.clone();
    vec![
        (
            "matmul",
            vec![rand_t(r, m, k), rand_t(r, k, n)],
            Box::new(|g, p| {
                let y = g.matmul(p[0], p[1])?;
                weighted_sum(g, y, 1)
            }),
        ),
        (
            "add",
            vec![rand_t(r, m, n), rand_t(r, 1, n)],
            Box::new(|g, p| {
                let y = g.add(p[0], p[1])?;
                weighted_sum(g, y, 2)
            }),
        ),
        (
            "mul/scale",
            vec![rand_t(r, m, n), rand_t(r, m, n)],
            Box::new(|g, p| {
                let y = g.mul(p[0], p[1])?;
                let y = g.scale(y, 0.7)?;
                weighted_sum(g, y, 3)
            }),
        ),
        (
            "concat/slice",
            vec![rand_t(r, m, a), rand_t(r, m, b)],
            Box::new(move |g, p| {
                let c = g.concat(&p[..2], Axis::Cols)?;
                let c = g.concat(&[c, c], Axis::Rows)?;
                let s = g.slice(c, Axis::Cols, 1.min(a + b - 1), (a + b - 1).max(1))?;
                let s = g.slice(s, Axis::Rows, 1, m)?;
                weighted_sum(g, s, 4)
            }),
        ),
        (
            "transpose/mean",
            vec![rand_t(r, m, n)],
            Box::new(|g, p| {
                let t = g.transpose(p[0])?;
                let t = g.mul(t, t)?;
                g.mean(t)
            }),
        ),
        (
            "tanh/sigmoid/relu",
            vec![rand_t(r, m, n)],
            Box::new(|g, p| {
                let x = g.tanh(p[0])?;
                let y = g.sigmoid(p[0])?;
                let z = g.relu(p[0])?;
                let s = g.add(x, y)?;
                let s = g.mul(s, z)?;
                weighted_sum(g, s, 5)
            }),
        ),
        (
            "softmax",
            vec![rand_t(r, m, n)],
            Box::new(|g, p| {
                let y = g.softmax(p[0])?;
                weighted_sum(g, y, 6)
            }),
        ),
        (
            "embedding/cross_entropy",
            vec![rand_t(r, m, n)],
            Box::new(move |g, p| {
                let e = g.embedding(p[0], &ids)?;
                g.cross_entropy(e, &targets)
            }),
        ),
        (
            "cross_entropy",
            vec![rand_t(r, k, n)],
            Box::new(move |g, p| g.cross_entropy(p[0], &targets2)),
        ),
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, &str) = (0.0, "");
    let mut checked = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, params, build) in op_cases(&mut rng) {
            let rep = check_gradients(&params, 1e-3, |g, ids| build(g, ids)).map_err(|e| format!("{name}: {e}"))?;
            checked += rep.checked;
            if rep.max_rel_error > worst.0 {
                worst = (rep.max_rel_error, name);
            }
        }
    }
    let cfg = ModelConfig {
        vocab_size: 12,
        embed_dim: 4,
        hidden_dim: 4,
        encoder_layers: 2,
        max_source_len: 3,
    };
    let m = Seq2SeqModel::new(cfg, 11).map_err(|e| e.to_string())?;
    let params: Vec<Tensor<f64>> = m
        .params()
        .iter()
        .map(|p| {
            let t = p.cast::<f64>();
            Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * 5.0).collect()).unwrap()
        })
        .collect();
    let layout = m.layout().clone();
    let rep = check_gradients(&params, 1e-3, |g, nodes| {
        build_loss(g, nodes, &layout, &cfg, &[4, 9, 6], &[BOS, 5, 11, EOS])
    })
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 <= 1e-3 && rep.max_rel_error <= 1e-3 && secs < 120.0,
        format!(
            "ops max rel err {:.2e} ({}), {checked} op elements; micro seq2seq max rel err {:.2e} over {} elements; {secs:.1}s",
            worst.0, worst.1, rep.max_rel_error, rep.checked
        ),
    )
}

// 2. Toy-task learning

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let train = copy_task(2000, 50, 3..=6, 1);
    let held_out = copy_task(200, 50, 3..=6, 2);
    let cfg = ModelConfig {
        vocab_size: 50,
        embed_dim: 32,
        hidden_dim: 32,
        encoder_layers: 2,
        max_source_len: 16,
    };
    let mut model = Seq2SeqModel::new(cfg, 7).map_err(|e| e.to_string())?;
    let initial = train.iter().map(|p| model.loss(p).unwrap()).sum::<f64>() / train.len() as f64;
    let tc = TrainConfig {
        epochs: 20,
        batch_size: 16,
        seed: 7,
        lr: 3e-3,
        clip: 5.0,
    };
    let trace = model.train(&train, &tc).map_err(|e| e.to_string())?;
    let last = *trace.last().unwrap();
    let exact = held_out
        .iter()
        .filter(|p| greedy_decode(&model, &p.source, 25).unwrap().tokens == [&p.source[..], &[EOS]].concat())
        .count();
    let secs = start.elapsed().as_secs_f64();
    let drop = 1.0 - last / initial;
    check(
        drop >= 0.5 && exact * 10 >= held_out.len() * 9 && secs < 600.0,
        format!(
            "loss {initial:.4} -> {last:.4} ({:.1}% drop), exact match {exact}/{}, {secs:.1}s",
            100.0 * drop,
            held_out.len()
        ),
    )
}

// 3. MSQG identity

fn criterion_3() -> Outcome {
    let m = peaky_model(20, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..100 {
        let doc = random_doc(&mut rng, 20);
        let a = msqg_decode(&m, &[doc.clone()], &MsqgOptions::default()).unwrap();
        let b = greedy_decode(&m, &doc, 25).unwrap();
        mismatches += usize::from(a.tokens != b.tokens);
    }
    check(mismatches == 0, format!("{mismatches} mismatches over 100 documents"))
}

// 4. Permutation invariance

fn criterion_4() -> Outcome {
    let m = peaky_model(20, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut runs = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=5);
        let docs: Vec<Vec<usize>> = (0..n).map(|_| random_doc(&mut rng, 20)).collect();
        let mut perm = docs.clone();
        perm.shuffle(&mut rng);
        for mode in [AggregateMode::Average, AggregateMode::Mult, AggregateMode::Max] {
            let opts = MsqgOptions {
                aggregate_mode: mode,
                betas: Some(vec![1.0; n]),
                ..MsqgOptions::default()
            };
            let a = msqg_decode(&m, &docs, &opts).unwrap();
            let b = msqg_decode(&m, &perm, &opts).unwrap();
            failures += usize::from(a.tokens != b.tokens || a.log_prob.to_bits() != b.log_prob.to_bits());
            runs += 1;
        }
    }
    check(failures == 0, format!("{failures} of {runs} permuted decodes differ"))
}

// 5. rmrep guarantee

fn criterion_5() -> Outcome {
    let m = peaky_model(12, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut repeats, mut too_long) = (0, 0);
    for i in 0..100 {
        let n = rng.gen_range(1..=4);
        let docs: Vec<Vec<usize>> = (0..n).map(|_| random_doc(&mut rng, 12)).collect();
        let q = match i % 4 {
            0 => concat_decode(&m, &docs, 5, 25, true).unwrap(),
            mode => msqg_decode(
                &m,
                &docs,
                &MsqgOptions {
                    aggregate_mode: [AggregateMode::Average, AggregateMode::Mult, AggregateMode::Max][mode - 1],
                    rmrep: true,
                    sharedh: i % 2 == 0,
                    ..MsqgOptions::default()
                },
            )
            .unwrap(),
        };
        let content: Vec<usize> = q.content().iter().copied().filter(|&t| t != UNK).collect();
        let mut dedup = content.clone();
        dedup.sort_unstable();
        dedup.dedup();
        repeats += usize::from(dedup.len() != content.len());
        too_long += usize::from(q.tokens.len() > 25);
    }
    check(
        repeats == 0 && too_long == 0,
        format!("{repeats} generations with repeats, {too_long} longer than 25 tokens, of 100"),
    )
}

// 6. Aggregation algebra

fn criterion_6() -> Outcome {
    let d = |p: &[f64]| StepDistribution::new(p.to_vec()).unwrap();
    let ones = [1.0, 1.0];
    let cases = [
        (AggregateMode::Average, [0.8, 0.2], [0.2, 0.8], [0.5, 0.5]),
        (AggregateMode::Mult, [0.9, 0.1], [0.1, 0.9], [0.5, 0.5]),
        (AggregateMode::Max, [0.7, 0.3], [0.2, 0.8], [7.0 / 15.0, 8.0 / 15.0]),
    ];
    let mut worst = 0.0f64;
    for (mode, a, b, want) in cases {
        let got = aggregate(&[d(&a), d(&b)], &ones, mode).map_err(|e| e.to_string())?;
        for (g, w) in got.probs.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    check(
        worst <= 1e-9,
        format!("max deviation {worst:.1e} over average, mult and max"),
    )
}

// 7. Beam soundness

fn seq_log_prob(m: &Seq2SeqModel, doc: &[usize], tokens: &[usize]) -> f64 {
    let enc = m.encode(doc).unwrap();
    let mut st = m.init_decoder(&enc.v).unwrap();
    let mut prev = BOS;
    let mut lp = 0.0;
    for &t in tokens {
        let (d, next) = m.decode_step(&st, prev, &enc.h).unwrap();
        lp += d.probs[t].ln();
        st = next;
        prev = t;
    }
    lp
}

fn criterion_7() -> Outcome {
    let m = peaky_model(20, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut greedy_mismatch = 0;
    for _ in 0..50 {
        let doc = random_doc(&mut rng, 20);
        greedy_mismatch +=
            usize::from(beam_decode(&m, &doc, 1, 25).unwrap().tokens != greedy_decode(&m, &doc, 25).unwrap().tokens);
    }
    // Vocabulary of three content tokens; UNK and EOS are emittable too.
    let emittable = [UNK, EOS, 4, 5, 6];
    let mut exhaustive_mismatch = 0;
    for seed in 0..10 {
        let tiny = peaky_model(7, 100 + seed);
        let doc = vec![4, 6, 5];
        let mut seqs: Vec<Vec<usize>> = vec![vec![EOS]];
        for &a in emittable.iter().filter(|&&t| t != EOS) {
            for &b in &emittable {
                seqs.push(vec![a, b]);
            }
        }
        let best = seqs
            .iter()
            .map(|s| (seq_log_prob(&tiny, &doc, s) / s.len() as f64, s))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1
            .clone();
        exhaustive_mismatch += usize::from(beam_decode(&tiny, &doc, 5, 2).unwrap().tokens != best);
    }
    check(
        greedy_mismatch == 0 && exhaustive_mismatch == 0,
        format!(
            "width-1 vs greedy: {greedy_mismatch}/50 differ; beam-5 vs exhaustive search: {exhaustive_mismatch}/10 differ"
        ),
    )
}

// 8. Metric oracle

struct MapScorer(HashMap<String, f64>);

impl RelevanceScorer for MapScorer {
    fn score(&self, _q: &[String], p: &str) -> msqg::Result<f64> {
        Ok(self.0[p])
    }
}

fn criterion_8() -> Outcome {
    let set = EvaluationSet {
        query_id: "q".into(),
        method: "m".into(),
        question: "q".into(),
        sources: (0..10).map(|i| format!("s{i}")).collect(),
        distractors: (0..90).map(|i| format!("d{i}")).collect(),
        small_pool: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let map: HashMap<String, f64> = set
            .sources
            .iter()
            .chain(&set.distractors)
            .map(|p| (p.clone(), rng.gen_range(0..25) as f64 / 24.0))
            .collect();
        let combined = set.sources.iter().map(|s| map[s]).sum::<f64>() / 10.0;
        let mut items: Vec<(f64, bool)> = set.distractors.iter().map(|d| (map[d], false)).collect();
        items.push((combined, true));
        items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let rank = items.iter().position(|x| x.1).unwrap() + 1;
        let want = [
            1.0 / rank as f64,
            if rank <= 10 { 1.0 / rank as f64 } else { 0.0 },
            1.0 / ((rank + 1) as f64).log2(),
        ];
        let got = score_and_rank(&MapScorer(map), &set).map_err(|e| e.to_string())?;
        for (g, w) in [got.mrr, got.mrr_at_10, got.ndcg].iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    let r4 = RetrievalResult::from_rank(4).unwrap();
    let exact4 = r4.mrr == 0.25 && r4.mrr_at_10 == 0.25 && r4.ndcg == 1.0 / 5f64.log2();
    check(
        worst <= 1e-12 && exact4,
        format!(
            "max deviation {worst:.1e} over 1000 score vectors; rank 4 gives {:?}",
            (r4.mrr, r4.mrr_at_10, r4.ndcg)
        ),
    )
}

// 9. BM25 exactness

fn criterion_9() -> Outcome {
    let docs: Vec<Vec<String>> = ["a b", "a c", "d"].iter().map(|d| tokenize(d)).collect();
    let idx = Bm25Index::build(&docs, Bm25Params::default()).map_err(|e| e.to_string())?;
    // Hand values: N = 3, avgdl = 5/3, idf = ln(1 + (N - df + 0.5)/(df + 0.5)).
    let idf = |df: f64| (1.0 + (3.0 - df + 0.5) / (df + 0.5)).ln();
    let tf1 = 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 2.0 / (5.0 / 3.0)));
    let want = [idf(2.0) * tf1, (idf(2.0) + idf(1.0)) * tf1, 0.0];
    let q = tokenize("a c");
    let mut worst = 0.0f64;
    for (i, w) in want.iter().enumerate() {
        worst = worst.max((idx.score(&q, i) - w).abs());
    }
    worst = worst
        .max((idx.score(&q, 0) - 0.434_457_136).abs())
        .max((idx.score(&q, 1) - 1.341_106_026).abs());
    let absent = idx.score_all(&tokenize("zebra")).iter().all(|&s| s == 0.0);
    check(
        worst <= 1e-6 && absent,
        format!("max deviation {worst:.1e}; absent-term query scores zero: {absent}"),
    )
}

// 10. Statistics oracles

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mw_worst = (0.0f64, 0, 0);
    for _ in 0..50 {
        let n1 = rng.gen_range(1..=8);
        let n2 = rng.gen_range(1..=8);
        let a: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.0..1.0)).collect();
        let approx = mann_whitney_u(&a, &b).unwrap().p_two_sided;
        let exact = mann_whitney_exact(&a, &b).unwrap().p_two_sided;
        if (approx - exact).abs() > mw_worst.0 {
            mw_worst = ((approx - exact).abs(), n1, n2);
        }
    }
    let mw_ok = mw_worst.0 <= 0.01;

    let ks_cases: [(&[f64], &[f64], f64); 4] = [
        (&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], 0.0),
        (&[1.0, 2.0], &[5.0, 6.0, 7.0], 1.0),
        (&[1.0, 2.0], &[1.5, 2.5], 0.5),
        (&[1.0, 2.0, 3.0], &[1.0, 4.0], 0.5),
    ];
    let ks_ok = ks_cases
        .iter()
        .all(|(a, b, d)| ks_two_sample(a, b).unwrap().statistic == *d);

    let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.75 * v).collect();
    let f = ols_fit(&x, &y).unwrap();
    let exact_ok = (f.slope + 0.75).abs() < 1e-12 && (f.intercept - 1.5).abs() < 1e-12;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut covered = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.3 * v + rng.sample(noise)).collect();
        let f = ols_fit(&x, &y).unwrap();
        covered += usize::from(f.slope_ci_95.0 <= 0.3 && 0.3 <= f.slope_ci_95.1);
    }
    let coverage = covered as f64 / 1000.0;
    let ols_ok = exact_ok && (coverage - 0.95).abs() <= 0.03;
    check(
        mw_ok && ks_ok && ols_ok,
        format!(
            "MW worst |approx - exact| {:.4} at n1={}, n2={} (limit 0.01): {}; KS hand cases: {}; OLS noiseless exact: {exact_ok}, slope CI coverage {coverage:.3}: {}",
            mw_worst.0,
            mw_worst.1,
            mw_worst.2,
            if mw_ok { "ok" } else { "exceeded" },
            if ks_ok { "ok" } else { "mismatch" },
            if ols_ok { "ok" } else { "failed" }
        ),
    )
}

// 11. Clustering oracle

/// Recomputes every cluster-pair distance from the point distances each
/// round; merges the closest pair while it is within the threshold.
fn naive_cluster(v: &[Vec<f64>], linkage: Linkage, threshold: f64) -> Vec<usize> {
    let mut clusters: Vec<Vec<usize>> = (0..v.len()).map(|i| vec![i]).collect();
    let dist = |a: &[usize], b: &[usize]| {
        let ds = a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| cosine_distance(&v[i], &v[j])));
        match linkage {
            Linkage::Max => ds.fold(f64::MIN, f64::max),
            Linkage::Average => ds.sum::<f64>() / (a.len() * b.len()) as f64,
        }
    };
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = dist(&clusters[i], &clusters[j]);
                if best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        match best {
            Some((i, j, d)) if d <= threshold => {
                let moved = clusters.remove(j);
                clusters[i].extend(moved);
            }
            _ => break,
        }
    }
    let mut label = vec![0; v.len()];
    for (c, members) in clusters.iter().enumerate() {
        for &m in members {
            label[m] = c;
        }
    }
    // Relabel by first appearance.
    let mut seen = HashMap::new();
    label
        .iter()
        .map(|l| {
            let k = seen.len();
            *seen.entry(*l).or_insert(k)
        })
        .collect()
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut compared, mut mismatched, mut non_monotone) = (0, 0, 0);
    for trial in 0..20 {
        let n = rng.gen_range(1..=30);
        let dim = rng.gen_range(2..=6);
        let v: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        for linkage in [Linkage::Max, Linkage::Average] {
            let mut last = usize::MAX;
            for step in 0..=40 {
                let t = step as f64 * 0.05;
                let c = agglomerative_cluster(&v, linkage, t).map_err(|e| e.to_string())?;
                compared += 1;
                if c.assignments != naive_cluster(&v, linkage, t) {
                    mismatched += 1;
                    if mismatched == 1 {
                        eprintln!("clustering mismatch: trial {trial}, {linkage}, threshold {t}");
                    }
                }
                non_monotone += usize::from(c.n_clusters > last);
                last = c.n_clusters;
            }
        }
    }
    check(
        mismatched == 0 && non_monotone == 0,
        format!(
            "{mismatched}/{compared} cuts differ from the naive reference; {non_monotone} increases in cluster count"
        ),
    )
}

// 12. End-to-end directional check

fn criterion_12(dir: &Path) -> Outcome {
    let start = Instant::now();
    let dataset = dir.join("topics.jsonl");
    let corpus = topic_corpus(&TopicCorpusConfig::default());
    let passages: usize = corpus.iter().map(|d| d.passages.len()).sum();
    write_dataset(&dataset, &corpus).map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        dataset: Some(dataset),
        output_dir: dir.join("e2e"),
        embed_dim: 32,
        hidden_dim: 32,
        max_source_len: 64,
        epochs: 30,
        batch_size: 16,
        lr: 5e-3,
        method: MethodChoice::One(Method::MsqgSharedhRmrep),
        ..RunConfig::default()
    };
    let run = || -> msqg::Result<f64> {
        let ckpt = cmd_train(&cfg)?;
        let gens = cmd_generate(&cfg, &ckpt)?;
        let sets = cmd_build_evalsets(&cfg, &gens)?;
        let results = cmd_evaluate(&cfg, &EvalInput::EvalSets(sets), &EvaluateOptions::default())?;
        Ok(summarize(&results)[0].mean_mrr)
    };
    let mrr = run().map_err(|e| e.to_string())?;
    let baseline = uniform_mrr(91);
    let secs = start.elapsed().as_secs_f64();
    check(
        mrr >= 3.0 * baseline && secs < 900.0,
        format!(
            "{} instances, {passages} passages: msqg_sharedh_rmrep MRR {mrr:.4} vs 3 x uniform {:.4}; {secs:.1}s",
            corpus.len(),
            3.0 * baseline
        ),
    )
}

// 13. Reproducibility

fn run_all_commands(dataset: &Path, out: &Path) -> msqg::Result<()> {
    let cfg = RunConfig {
        dataset: Some(dataset.to_path_buf()),
        output_dir: out.to_path_buf(),
        embed_dim: 8,
        hidden_dim: 8,
        encoder_layers: 1,
        max_source_len: 40,
        epochs: 2,
        batch_size: 8,
        lr: 5e-3,
        vocab_min_freq: 1,
        max_len: 10,
        workers: 3,
        ..RunConfig::default()
    };
    let ckpt = cmd_train(&cfg)?;
    let gens = cmd_generate(&cfg, &ckpt)?;
    let sets = cmd_build_evalsets(&cfg, &gens)?;
    let opts = EvaluateOptions {
        significance: true,
        ..EvaluateOptions::default()
    };
    cmd_evaluate(&cfg, &EvalInput::EvalSets(sets), &opts)?;
    cmd_analyze(&cfg, &Analysis::Cluster)?;
    cmd_analyze(&cfg, &Analysis::Similarity)?;
    cmd_analyze(&cfg, &Analysis::AttentionOls { checkpoint: ckpt })?;
    Ok(())
}

fn criterion_13(dir: &Path) -> Outcome {
    let dataset = dir.join("small.jsonl");
    let corpus = topic_corpus(&TopicCorpusConfig {
        topics: 2,
        instances_per_topic: 5,
        topic_vocab: 15,
        passage_len: 8,
        ..TopicCorpusConfig::default()
    });
    write_dataset(&dataset, &corpus).map_err(|e| e.to_string())?;
    let (a, b) = (dir.join("run_a"), dir.join("run_b"));
    run_all_commands(&dataset, &a).map_err(|e| e.to_string())?;
    run_all_commands(&dataset, &b).map_err(|e| e.to_string())?;
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .collect();
    check(
        differing.is_empty() && names.len() >= 15,
        format!(
            "{} output files compared across two runs, differing: {differing:?}",
            names.len()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("gradient correctness", Box::new(criterion_1)),
        ("toy-task learning", Box::new(criterion_2)),
        ("MSQG identity", Box::new(criterion_3)),
        ("permutation invariance", Box::new(criterion_4)),
        ("rmrep guarantee", Box::new(criterion_5)),
        ("aggregation algebra", Box::new(criterion_6)),
        ("beam soundness", Box::new(criterion_7)),
        ("metric oracle", Box::new(criterion_8)),
        ("BM25 exactness", Box::new(criterion_9)),
        ("statistics oracles", Box::new(criterion_10)),
        ("clustering oracle", Box::new(criterion_11)),
        (
            "end-to-end directional check",
            Box::new({
                let d = dir.clone();
                move || criterion_12(&d)
            }),
        ),
        (
            "reproducibility",
            Box::new({
                let d = dir.clone();
                move || criterion_13(&d)
            }),
        ),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = Duration::from_secs_f64(start.elapsed().as_secs_f64());
        match outcome {
            Ok(detail) => println!("PASS {label}: {detail} [{took:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail} [{took:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
