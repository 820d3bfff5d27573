use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::decoding::{AggregateMode, DecodeConfig, Method};
use crate::error::{Error, Result};
use crate::retrieval::Bm25Params;
use crate::seq2seq::TrainConfig;
use crate::stats::Linkage;

/// Which methods a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    One(Method),
    /// The eight compared systems.
    All,
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(MethodChoice::All)
        } else {
            s.parse().map(MethodChoice::One)
        }
    }
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::One(m) => vec![m],
            MethodChoice::All => Method::COMPARED.to_vec(),
        }
    }
}

/// Every setting of a run. Loaded from a `key = value` file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub vocab_max_size: usize,
    pub vocab_min_freq: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub max_source_len: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub clip: f64,
    pub method: MethodChoice,
    /// Only refines the plain `msqg` method; named variants fix their own.
    pub aggregate_mode: Option<AggregateMode>,
    pub rmrep: Option<bool>,
    pub sharedh: Option<bool>,
    pub beam: usize,
    pub max_len: usize,
    pub k1: f64,
    pub b: f64,
    pub linkage: Linkage,
    pub threshold: f64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let decode = DecodeConfig::default();
        let bm25 = Bm25Params::default();
        Self {
            dataset: None,
            pool: None,
            output_dir: PathBuf::from("out"),
            vocab_max_size: 20_000,
            vocab_min_freq: 2,
            embed_dim: 128,
            hidden_dim: 256,
            encoder_layers: 2,
            max_source_len: 512,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.lr,
            seed: train.seed,
            clip: train.clip,
            method: MethodChoice::All,
            aggregate_mode: None,
            rmrep: None,
            sharedh: None,
            beam: decode.beam_width,
            max_len: decode.max_len,
            k1: bm25.k1,
            b: bm25.b,
            linkage: Linkage::Max,
            threshold: 0.1,
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value {value:?} for {key}, expected true or false"
        ))),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 26] = [
        "dataset",
        "pool",
        "output_dir",
        "vocab_max_size",
        "vocab_min_freq",
        "embed_dim",
        "hidden_dim",
        "encoder_layers",
        "max_source_len",
        "epochs",
        "batch_size",
        "lr",
        "seed",
        "clip",
        "method",
        "aggregate_mode",
        "rmrep",
        "sharedh",
        "beam",
        "max_len",
        "k1",
        "b",
        "linkage",
        "threshold",
        "workers",
        "beam_width",
    ];

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "pool" => self.pool = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "vocab_max_size" => self.vocab_max_size = parse(key, value)?,
            "vocab_min_freq" => self.vocab_min_freq = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "encoder_layers" => self.encoder_layers = parse(key, value)?,
            "max_source_len" => self.max_source_len = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "method" => self.method = value.parse()?,
            "aggregate_mode" => self.aggregate_mode = Some(value.parse()?),
            "rmrep" => self.rmrep = Some(parse_bool(key, value)?),
            "sharedh" => self.sharedh = Some(parse_bool(key, value)?),
            "beam" | "beam_width" => self.beam = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "k1" => self.k1 = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "linkage" => self.linkage = value.parse()?,
            "threshold" => self.threshold = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", origin.display(), i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.parse_str(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_max_size", self.vocab_max_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("encoder_layers", self.encoder_layers),
            ("max_source_len", self.max_source_len),
            ("batch_size", self.batch_size),
            ("beam", self.beam),
            ("max_len", self.max_len),
            ("workers", self.workers),
            ("vocab_min_freq", self.vocab_min_freq),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !self.clip.is_finite() {
            return Err(Error::Config("clip must be finite".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::Config("threshold must be non-negative".into()));
        }
        self.bm25().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            lr: self.lr,
            clip: self.clip,
        }
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            beam_width: self.beam,
            max_len: self.max_len,
        }
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (set dataset or pass --dataset)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_rejects_unknown_keys() {
        let mut c = RunConfig::default();
        c.parse_str(
            "# toy\nepochs = 3\nmethod=msqg_mult\nrmrep = true  # on\n\n",
            Path::new("c"),
        )
        .unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.method, MethodChoice::One(Method::MsqgMult));
        assert_eq!(c.rmrep, Some(true));
        assert!(matches!(
            c.parse_str("colour = red", Path::new("c")),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            c.parse_str("epochs = many", Path::new("c")),
            Err(Error::Config(_))
        ));
        assert!(matches!(c.parse_str("epochs", Path::new("c")), Err(Error::Config(_))));
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut c = RunConfig::default();
        c.b = 2.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.max_len = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn every_listed_key_is_settable() {
        let samples = [
            ("dataset", "d"),
            ("pool", "p"),
            ("output_dir", "o"),
            ("method", "all"),
            ("aggregate_mode", "max"),
            ("rmrep", "false"),
            ("sharedh", "true"),
            ("linkage", "average"),
            ("lr", "0.01"),
            ("clip", "1"),
            ("k1", "1.5"),
            ("b", "0.5"),
            ("threshold", "0.2"),
        ];
        for key in RunConfig::KEYS {
            let v = samples.iter().find(|(k, _)| *k == key).map_or("3", |(_, v)| v);
            RunConfig::default().set(key, v).unwrap();
        }
    }
}
