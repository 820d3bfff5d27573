//! Configuration and the pipeline commands behind the `msqg` binary.
//!
//! Every command reads a [`RunConfig`] (defaults, then the `--config` file,
//! then flags) and writes its outputs under `output_dir` with fixed names.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_analyze, cmd_build_evalsets, cmd_evaluate, cmd_generate, cmd_train, load_pool, strategies, vocab_path,
    Analysis, EvalInput, EvaluateOptions, ScorerKind, Strategy, ASSIGNMENTS_FILE, ATTENTION_OLS_FILE,
    ATTENTION_POINTS_FILE, CHECKPOINT_FILE, CURVE_FILE, DENDROGRAM_FILE, EVALSETS_FILE, GENERATIONS_FILE, LOSS_FILE,
    REPORT_FILE, SET_RESULTS_FILE, SIGNIFICANCE_FILE, SIMILARITY_FILE, UNIQUENESS_FILE,
};
pub use config::{MethodChoice, RunConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "msqg", version, about = "Common question generation from multiple documents")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Any configuration key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// One of the compared methods, `greedy`, or `all`.
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    #[arg(long = "max-len", global = true)]
    pub max_len: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Passage pool, one passage per line.
    #[arg(long, global = true)]
    pub pool: Option<PathBuf>,
    #[arg(long = "output-dir", short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the single-document model; writes model.ckpt, model.vocab, loss.tsv.
    Train,
    /// Generate one question per instance; writes generations.tsv, uniqueness.tsv.
    Generate {
        /// Defaults to model.ckpt in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Attach sources and retrieved distractors; writes evalsets.jsonl.
    BuildEvalsets {
        /// Defaults to generations.tsv in the output directory.
        #[arg(long)]
        generations: Option<PathBuf>,
    },
    /// Score evaluation sets; writes report.tsv, set_results.tsv.
    Evaluate {
        /// Defaults to evalsets.jsonl in the output directory.
        #[arg(long, conflicts_with = "generations")]
        evalsets: Option<PathBuf>,
        /// Build evaluation sets from this generations file instead.
        #[arg(long)]
        generations: Option<PathBuf>,
        /// Mann-Whitney tests on per-set MRR between all method pairs.
        #[arg(long)]
        significance: bool,
        /// bm25, random or oracle.
        #[arg(long, default_value = "bm25")]
        scorer: String,
    },
    /// Dataset and model analyses.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Cluster instances by their passages; writes the curve, assignments and dendrogram.
    Cluster {
        #[arg(long)]
        threshold: Option<f64>,
        /// max (complete) or average.
        #[arg(long)]
        linkage: Option<String>,
    },
    /// Regress attention weight on source position.
    AttentionOls {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Passage-set similarity against random sets.
    Similarity,
}

impl GlobalArgs {
    /// Defaults, then the configuration file, then `--set`, then named flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse()?;
        }
        if let Some(b) = self.beam {
            cfg.beam = b;
        }
        if let Some(l) = self.max_len {
            cfg.max_len = l;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(p) = &self.pool {
            cfg.pool = Some(p.clone());
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = cli.global.resolve()?;
    let default_in = |name: &str| cfg.output_dir.join(name);
    match cli.command {
        Command::Train => {
            let ckpt = cmd_train(&cfg)?;
            println!("{}", ckpt.display());
        }
        Command::Generate { checkpoint } => {
            let ckpt = checkpoint.unwrap_or_else(|| default_in(CHECKPOINT_FILE));
            println!("{}", cmd_generate(&cfg, &ckpt)?.display());
        }
        Command::BuildEvalsets { generations } => {
            let gens = generations.unwrap_or_else(|| default_in(GENERATIONS_FILE));
            println!("{}", cmd_build_evalsets(&cfg, &gens)?.display());
        }
        Command::Evaluate {
            evalsets,
            generations,
            significance,
            scorer,
        } => {
            let input = match (evalsets, generations) {
                (_, Some(g)) => EvalInput::Generations(g),
                (Some(e), None) => EvalInput::EvalSets(e),
                (None, None) => EvalInput::EvalSets(default_in(EVALSETS_FILE)),
            };
            let opts = EvaluateOptions {
                scorer: scorer.parse()?,
                significance,
            };
            let results = cmd_evaluate(&cfg, &input, &opts)?;
            for s in crate::retrieval::summarize(&results) {
                println!(
                    "{}\tMRR {:.4}\tMRR@10 {:.4}\tnDCG {:.4}\tunique {:.1}%",
                    s.method, s.mean_mrr, s.mean_mrr_at_10, s.mean_ndcg, s.pct_unique
                );
            }
        }
        Command::Analyze { what } => {
            let analysis = match what {
                AnalyzeCommand::Cluster { threshold, linkage } => {
                    if let Some(t) = threshold {
                        cfg.threshold = t;
                    }
                    if let Some(l) = linkage {
                        cfg.linkage = l.parse()?;
                    }
                    cfg.validate()?;
                    Analysis::Cluster
                }
                AnalyzeCommand::AttentionOls { checkpoint } => Analysis::AttentionOls {
                    checkpoint: checkpoint.unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE)),
                },
                AnalyzeCommand::Similarity => Analysis::Similarity,
            };
            for p in cmd_analyze(&cfg, &analysis)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
/// Usage errors exit with 2, as do configuration errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
