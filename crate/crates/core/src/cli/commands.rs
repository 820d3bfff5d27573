use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{MethodChoice, RunConfig};
use crate::decoding::{
    attention_trace, generate, msqg_decode, read_generations, write_generations, AggregateMode, GeneratedQuestion,
    Generation, Method, MsqgOptions,
};
use crate::error::{Error, Result};
use crate::retrieval::{
    evaluate_sets, mean_pairwise_similarity, read_eval_sets, summarize, write_eval_sets, write_report,
    write_set_results, Bm25Index, Bm25Scorer, EvalSetBuilder, EvaluationSet, OracleScorer, RandomScorer, SetResult,
    TfIdfEmbedder,
};
use crate::seq2seq::{load_checkpoint, save_checkpoint, ModelConfig, Seq2SeqModel};
use crate::stats::{
    agglomerative_cluster, ols_fit, pairwise_mann_whitney, pool_attention, threshold_grid, write_assignments,
    write_curve, write_dendrogram, write_ols, write_test_report,
};
use crate::text::{load_dataset, training_pairs, training_sequences, DataInstance, Vocabulary};
use crate::tsv;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss.tsv";
pub const GENERATIONS_FILE: &str = "generations.tsv";
pub const UNIQUENESS_FILE: &str = "uniqueness.tsv";
pub const EVALSETS_FILE: &str = "evalsets.jsonl";
pub const REPORT_FILE: &str = "report.tsv";
pub const SET_RESULTS_FILE: &str = "set_results.tsv";
pub const SIGNIFICANCE_FILE: &str = "significance.tsv";
pub const CURVE_FILE: &str = "cluster_curve.tsv";
pub const ASSIGNMENTS_FILE: &str = "cluster_assignments.tsv";
pub const DENDROGRAM_FILE: &str = "dendrogram.tsv";
pub const ATTENTION_OLS_FILE: &str = "attention_ols.tsv";
pub const ATTENTION_POINTS_FILE: &str = "attention_points.tsv";
pub const SIMILARITY_FILE: &str = "similarity.tsv";

/// The vocabulary file stored next to a checkpoint.
pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab")
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.join(name))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_model(checkpoint: &Path) -> Result<(Seq2SeqModel, Vocabulary)> {
    let model = load_checkpoint(checkpoint)?;
    let vocab = Vocabulary::load(&vocab_path(checkpoint))?;
    if vocab.len() != model.config().vocab_size {
        return Err(Error::Checkpoint {
            path: checkpoint.to_path_buf(),
            message: format!(
                "vocabulary has {} entries but the model expects {}",
                vocab.len(),
                model.config().vocab_size
            ),
        });
    }
    Ok((model, vocab))
}

/// Builds the vocabulary, trains, and writes the checkpoint, its vocabulary
/// and a per-epoch loss trace. Returns the checkpoint path.
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let data = load_dataset(cfg.dataset_path()?)?;
    let vocab = Vocabulary::build(training_sequences(&data), cfg.vocab_max_size, cfg.vocab_min_freq)?;
    let pairs = training_pairs(&data, &vocab);
    if pairs.is_empty() {
        return Err(Error::invalid("dataset has no selected passages to train on"));
    }
    let model_cfg = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: cfg.embed_dim,
        hidden_dim: cfg.hidden_dim,
        encoder_layers: cfg.encoder_layers,
        max_source_len: cfg.max_source_len,
    };
    log::info!("{} training pairs, vocabulary of {}", pairs.len(), vocab.len());
    let mut model = Seq2SeqModel::new(model_cfg, cfg.seed)?;
    let losses = model.train(&pairs, &cfg.train_config())?;
    let ckpt = out_path(cfg, CHECKPOINT_FILE)?;
    save_checkpoint(&model, &ckpt)?;
    vocab.save(&vocab_path(&ckpt))?;
    tsv::write(
        &out_path(cfg, LOSS_FILE)?,
        &["epoch", "loss"],
        losses
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]),
    )?;
    Ok(ckpt)
}

/// A decoding strategy and the label it is reported under.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Named(Method),
    /// Plain `msqg` refined by the aggregate_mode, rmrep and sharedh keys.
    Custom(MsqgOptions),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Named(m) => m.name().to_string(),
            Strategy::Custom(o) => {
                let mut s = String::from("msqg");
                if o.aggregate_mode != AggregateMode::Average {
                    s.push_str(&format!("_{}", o.aggregate_mode));
                }
                if o.sharedh {
                    s.push_str("_sharedh");
                }
                if o.rmrep {
                    s.push_str("_rmrep");
                }
                s
            }
        }
    }

    fn run(&self, model: &Seq2SeqModel, docs: &[Vec<usize>], cfg: &RunConfig) -> Result<GeneratedQuestion> {
        match self {
            Strategy::Named(m) => generate(model, docs, *m, &cfg.decode_config()),
            Strategy::Custom(o) => msqg_decode(model, docs, o),
        }
    }
}

/// Strategies selected by the configuration.
pub fn strategies(cfg: &RunConfig) -> Vec<Strategy> {
    let overridden = cfg.aggregate_mode.is_some() || cfg.rmrep.is_some() || cfg.sharedh.is_some();
    match cfg.method {
        MethodChoice::One(Method::Msqg) if overridden => {
            let opts = MsqgOptions {
                aggregate_mode: cfg.aggregate_mode.unwrap_or(AggregateMode::Average),
                rmrep: cfg.rmrep.unwrap_or(false),
                sharedh: cfg.sharedh.unwrap_or(false),
                betas: None,
                max_len: cfg.max_len,
            };
            let named = Method::COMPARED
                .into_iter()
                .find(|m| m.msqg_options(cfg.max_len).as_ref() == Some(&opts));
            vec![named.map_or(Strategy::Custom(opts), Strategy::Named)]
        }
        choice => {
            if overridden {
                log::warn!("aggregate_mode, rmrep and sharedh only refine method=msqg; ignored");
            }
            choice.methods().into_iter().map(Strategy::Named).collect()
        }
    }
}

/// Decodes one question per instance from all of its passages, for every
/// selected strategy. Writes the generations and a uniqueness report.
pub fn cmd_generate(cfg: &RunConfig, checkpoint: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let (model, vocab) = load_model(checkpoint)?;
    let data = load_dataset(cfg.dataset_path()?)?;
    let docs: Vec<Vec<Vec<usize>>> = data
        .iter()
        .map(|inst| inst.passages.iter().map(|p| vocab.encode(&p.tokens)).collect())
        .collect();
    let strategies = strategies(cfg);
    let jobs: Vec<(usize, &Strategy)> = strategies
        .iter()
        .flat_map(|s| (0..data.len()).map(move |i| (i, s)))
        .collect();
    let run = |&(i, s): &(usize, &Strategy)| -> Result<Generation> {
        let q = s.run(&model, &docs[i], cfg)?;
        Ok(Generation {
            query_id: data[i].query_id.clone(),
            method: s.label(),
            question: q.to_text(&vocab),
        })
    };
    let rows = thread_pool(cfg.workers)?.install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    let path = out_path(cfg, GENERATIONS_FILE)?;
    write_generations(&path, &rows)?;
    tsv::write(
        &out_path(cfg, UNIQUENESS_FILE)?,
        &["method", "n", "n_unique", "pct_unique"],
        strategies.iter().map(|s| {
            let label = s.label();
            let qs: Vec<&str> = rows
                .iter()
                .filter(|g| g.method == label)
                .map(|g| g.question.as_str())
                .collect();
            let unique = qs.iter().collect::<HashSet<_>>().len();
            let pct = if qs.is_empty() {
                0.0
            } else {
                100.0 * unique as f64 / qs.len() as f64
            };
            vec![label, qs.len().to_string(), unique.to_string(), pct.to_string()]
        }),
    )?;
    Ok(path)
}

/// The retrieval pool: the `pool` file, one passage per line, or else every
/// distinct passage of the dataset in order of first appearance.
pub fn load_pool(cfg: &RunConfig, data: &[DataInstance]) -> Result<Vec<String>> {
    let pool: Vec<String> = match &cfg.pool {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => {
            let mut seen = HashSet::new();
            data.iter()
                .flat_map(|d| &d.passages)
                .filter(|p| seen.insert(p.text.trim().to_string()))
                .map(|p| p.text.clone())
                .collect()
        }
    };
    if pool.is_empty() {
        return Err(Error::invalid("passage pool is empty"));
    }
    Ok(pool)
}

fn pool_index(cfg: &RunConfig, pool: &[String]) -> Result<Bm25Index> {
    let docs: Vec<Vec<String>> = pool.iter().map(|p| crate::text::tokenize(p)).collect();
    Bm25Index::build(&docs, cfg.bm25())
}

fn build_sets(
    cfg: &RunConfig,
    generations: &Path,
    data: &[DataInstance],
    pool: &[String],
    index: &Bm25Index,
) -> Result<Vec<EvaluationSet>> {
    let gens = read_generations(generations)?;
    let mut builder = EvalSetBuilder::new(index, pool)?;
    let by_id: std::collections::HashMap<&str, &DataInstance> = data.iter().map(|d| (d.query_id.as_str(), d)).collect();
    let wanted: Option<Vec<String>> = match cfg.method {
        MethodChoice::All => None,
        MethodChoice::One(_) => Some(strategies(cfg).iter().map(Strategy::label).collect()),
    };
    let mut sets = Vec::new();
    for g in &gens {
        if wanted.as_ref().is_some_and(|w| !w.contains(&g.method)) {
            continue;
        }
        let inst = by_id
            .get(g.query_id.as_str())
            .ok_or_else(|| Error::invalid(format!("generation for unknown query_id {:?}", g.query_id)))?;
        let sources: Vec<String> = inst.passages.iter().map(|p| p.text.clone()).collect();
        sets.push(builder.build(&g.query_id, &g.method, &g.question, &sources)?);
    }
    if let Some(w) = wanted {
        for label in w {
            if !sets.iter().any(|s| s.method == label) {
                return Err(Error::invalid(format!("method {label} has no generations")));
            }
        }
    }
    if sets.is_empty() {
        return Err(Error::invalid("no generations to evaluate"));
    }
    Ok(sets)
}

/// Turns generations into evaluation sets: the instance's passages plus
/// BM25-retrieved distractors from the pool.
pub fn cmd_build_evalsets(cfg: &RunConfig, generations: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let data = load_dataset(cfg.dataset_path()?)?;
    let pool = load_pool(cfg, &data)?;
    let index = pool_index(cfg, &pool)?;
    let sets = build_sets(cfg, generations, &data, &pool, &index)?;
    let path = out_path(cfg, EVALSETS_FILE)?;
    write_eval_sets(&path, &sets)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScorerKind {
    /// Pool-normalized BM25.
    #[default]
    Bm25,
    /// Seeded uniform noise.
    Random,
    /// Scores each set's own sources above everything else.
    Oracle,
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(ScorerKind::Bm25),
            "random" => Ok(ScorerKind::Random),
            "oracle" => Ok(ScorerKind::Oracle),
            other => Err(Error::Config(format!("unknown scorer {other:?}"))),
        }
    }
}

/// Where evaluation sets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalInput {
    EvalSets(PathBuf),
    /// Built on the fly, as `build-evalsets` would.
    Generations(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluateOptions {
    pub scorer: ScorerKind,
    pub significance: bool,
}

/// Scores every set and writes the per-method report and per-set results,
/// plus pairwise Mann-Whitney tests on per-set MRR when asked.
pub fn cmd_evaluate(cfg: &RunConfig, input: &EvalInput, opts: &EvaluateOptions) -> Result<Vec<SetResult>> {
    cfg.validate()?;
    let needs_pool = opts.scorer == ScorerKind::Bm25 || matches!(input, EvalInput::Generations(_));
    let data = if needs_pool || cfg.dataset.is_some() {
        load_dataset(cfg.dataset_path()?)?
    } else {
        Vec::new()
    };
    let pool = if needs_pool { load_pool(cfg, &data)? } else { Vec::new() };
    let index = if needs_pool {
        Some(pool_index(cfg, &pool)?)
    } else {
        None
    };
    let sets = match input {
        EvalInput::EvalSets(p) => {
            let sets = read_eval_sets(p)?;
            if let MethodChoice::One(_) = cfg.method {
                let labels: Vec<String> = strategies(cfg).iter().map(Strategy::label).collect();
                let kept: Vec<EvaluationSet> = sets.into_iter().filter(|s| labels.contains(&s.method)).collect();
                for l in &labels {
                    if !kept.iter().any(|s| &s.method == l) {
                        return Err(Error::invalid(format!("method {l} has no generations")));
                    }
                }
                kept
            } else {
                sets
            }
        }
        EvalInput::Generations(p) => build_sets(cfg, p, &data, &pool, index.as_ref().expect("pool index"))?,
    };
    if sets.is_empty() {
        return Err(Error::invalid("no evaluation sets"));
    }
    let results = match opts.scorer {
        ScorerKind::Bm25 => {
            let scorer = Bm25Scorer::new(index.as_ref().expect("pool index"));
            evaluate_sets(&scorer, &sets, cfg.workers)?
        }
        ScorerKind::Random => evaluate_sets(&RandomScorer { seed: cfg.seed }, &sets, cfg.workers)?,
        ScorerKind::Oracle => {
            let mut all = Vec::with_capacity(sets.len());
            for s in &sets {
                let scorer = OracleScorer::new(s.sources.iter().cloned());
                all.extend(evaluate_sets(&scorer, std::slice::from_ref(s), 1)?);
            }
            sort_results(&mut all);
            all
        }
    };
    write_report(&out_path(cfg, REPORT_FILE)?, &summarize(&results))?;
    write_set_results(&out_path(cfg, SET_RESULTS_FILE)?, &results)?;
    if opts.significance {
        let summaries = summarize(&results);
        let samples: Vec<(String, Vec<f64>)> = summaries
            .iter()
            .map(|s| {
                let mrr = results
                    .iter()
                    .filter(|r| r.method == s.method)
                    .map(|r| r.result.mrr)
                    .collect();
                (s.method.clone(), mrr)
            })
            .collect();
        write_test_report(&out_path(cfg, SIGNIFICANCE_FILE)?, &pairwise_mann_whitney(&samples)?)?;
    }
    Ok(results)
}

fn sort_results(results: &mut [SetResult]) {
    results
        .sort_by(|a, b| crate::decoding::cmp_query_id(&a.query_id, &b.query_id).then_with(|| a.method.cmp(&b.method)));
}

/// Analyses over a dataset or a trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    /// Agglomerative clustering of per-instance mean tf-idf vectors.
    Cluster,
    /// Regression of attention weight on source position.
    AttentionOls { checkpoint: PathBuf },
    /// Pairwise passage similarity of each instance against a random set.
    Similarity,
}

pub fn cmd_analyze(cfg: &RunConfig, analysis: &Analysis) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load_dataset(cfg.dataset_path()?)?;
    match analysis {
        Analysis::Cluster => analyze_cluster(cfg, &data),
        Analysis::AttentionOls { checkpoint } => analyze_attention(cfg, &data, checkpoint),
        Analysis::Similarity => analyze_similarity(cfg, &data),
    }
}

fn passage_embedder(data: &[DataInstance]) -> Result<TfIdfEmbedder> {
    let corpus: Vec<Vec<String>> = data
        .iter()
        .flat_map(|d| d.passages.iter().map(|p| p.tokens.clone()))
        .collect();
    TfIdfEmbedder::fit(&corpus)
}

fn analyze_cluster(cfg: &RunConfig, data: &[DataInstance]) -> Result<Vec<PathBuf>> {
    let embedder = passage_embedder(data)?;
    let vectors = data
        .iter()
        .map(|d| {
            let toks: Vec<Vec<String>> = d.passages.iter().map(|p| p.tokens.clone()).collect();
            crate::retrieval::mean_embedding(&toks, &embedder)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = agglomerative_cluster(&vectors, cfg.linkage, cfg.threshold)?;
    log::info!(
        "{} clusters at threshold {} ({} linkage)",
        c.n_clusters,
        cfg.threshold,
        cfg.linkage
    );
    let ids: Vec<String> = data.iter().map(|d| d.query_id.clone()).collect();
    let paths = [
        out_path(cfg, CURVE_FILE)?,
        out_path(cfg, ASSIGNMENTS_FILE)?,
        out_path(cfg, DENDROGRAM_FILE)?,
    ];
    write_curve(&paths[0], &c.dendrogram.curve(&threshold_grid(1.0, 100)))?;
    write_assignments(&paths[1], &ids, &c.assignments)?;
    write_dendrogram(&paths[2], &c.dendrogram)?;
    Ok(paths.to_vec())
}

fn analyze_attention(cfg: &RunConfig, data: &[DataInstance], checkpoint: &Path) -> Result<Vec<PathBuf>> {
    let (model, vocab) = load_model(checkpoint)?;
    let trace = |d: &DataInstance| -> Result<Vec<Vec<f64>>> {
        let docs: Vec<Vec<usize>> = d.passages.iter().map(|p| vocab.encode(&p.tokens)).collect();
        let q = generate(&model, &docs, Method::S2s, &cfg.decode_config())?;
        attention_trace(&model, &docs.concat(), &q.tokens)
    };
    let traces = thread_pool(cfg.workers)?.install(|| data.par_iter().map(trace).collect::<Result<Vec<_>>>())?;
    let (x, y) = pool_attention(&traces);
    let fit = ols_fit(&x, &y)?;
    log::info!(
        "attention slope {} (95% CI {} to {}), n = {}",
        fit.slope,
        fit.slope_ci_95.0,
        fit.slope_ci_95.1,
        fit.n
    );
    let paths = [
        out_path(cfg, ATTENTION_OLS_FILE)?,
        out_path(cfg, ATTENTION_POINTS_FILE)?,
    ];
    write_ols(&paths[0], &fit)?;
    tsv::write(
        &paths[1],
        &["position", "attention"],
        x.iter().zip(&y).map(|(a, b)| vec![a.to_string(), b.to_string()]),
    )?;
    Ok(paths.to_vec())
}

fn analyze_similarity(cfg: &RunConfig, data: &[DataInstance]) -> Result<Vec<PathBuf>> {
    let embedder = passage_embedder(data)?;
    let all: Vec<&Vec<String>> = data.iter().flat_map(|d| d.passages.iter().map(|p| &p.tokens)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let (mut own_sum, mut rand_sum) = (0.0, 0.0);
    for d in data {
        if d.passages.len() < 2 || all.len() < 2 {
            log::warn!("{}: fewer than two passages, skipped", d.query_id);
            continue;
        }
        let own: Vec<Vec<String>> = d.passages.iter().map(|p| p.tokens.clone()).collect();
        let k = own.len().min(all.len());
        let random: Vec<Vec<String>> = sample(&mut rng, all.len(), k)
            .into_iter()
            .map(|i| all[i].clone())
            .collect();
        let s_own = mean_pairwise_similarity(&own, &embedder)?;
        let s_rand = mean_pairwise_similarity(&random, &embedder)?;
        own_sum += s_own;
        rand_sum += s_rand;
        rows.push(vec![d.query_id.clone(), s_own.to_string(), s_rand.to_string()]);
    }
    if rows.is_empty() {
        return Err(Error::invalid("no instance has two passages"));
    }
    let n = rows.len() as f64;
    log::info!(
        "mean similarity {} within sets, {} for random sets",
        own_sum / n,
        rand_sum / n
    );
    let path = out_path(cfg, SIMILARITY_FILE)?;
    tsv::write(&path, &["query_id", "set_similarity", "random_similarity"], rows)?;
    Ok(vec![path])
}
