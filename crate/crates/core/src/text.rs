//! Tokenization, vocabulary, and MS-MARCO-QA shaped JSON Lines datasets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const NUM_RESERVED: usize = 4;

const RESERVED: [&str; NUM_RESERVED] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Lowercases, splits on whitespace, and splits every punctuation character
/// into its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if is_punct(ch) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_lowercase().collect());
            } else {
                cur.extend(ch.to_lowercase());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn is_punct(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(
            ch,
            '‘' | '’' | '“' | '”' | '«' | '»' | '…' | '\u{2013}' | '\u{2014}' | '¿' | '¡' | '·'
        )
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(|t| t.as_ref()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `max_size - 4` most frequent tokens with count `>= min_freq`.
    /// Equal counts are ordered lexicographically.
    pub fn build<'a, I, S>(sequences: I, max_size: usize, min_freq: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if max_size <= NUM_RESERVED {
            return Err(Error::invalid(format!(
                "vocabulary max_size must exceed {NUM_RESERVED}, got {max_size}"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut seen_any = false;
        for seq in sequences {
            for t in seq {
                seen_any = true;
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        if !seen_any {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !RESERVED.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - NUM_RESERVED);

        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// One token per line, line number = id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for t in &self.tokens {
            writeln!(w, "{t}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for line in BufReader::new(f).lines() {
            tokens.push(line.map_err(|e| Error::io(path, e))?);
        }
        if tokens.len() < NUM_RESERVED || tokens[..NUM_RESERVED] != RESERVED {
            return Err(Error::Data {
                path: path.to_path_buf(),
                line: 1,
                message: "vocabulary file does not start with the reserved tokens".into(),
            });
        }
        Ok(Self::from_tokens(tokens))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub text: String,
    pub tokens: Vec<String>,
    pub is_selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataInstance {
    pub query_id: String,
    pub query_text: String,
    pub query: Vec<String>,
    pub passages: Vec<Passage>,
}

impl DataInstance {
    pub fn selected(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter().filter(|p| p.is_selected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub source: Vec<usize>,
    /// `BOS … EOS`
    pub target: Vec<usize>,
}

/// One pair per selected passage; instances with no selected passage
/// contribute nothing.
pub fn training_pairs(instances: &[DataInstance], vocab: &Vocabulary) -> Vec<TrainingPair> {
    let mut pairs = Vec::new();
    for inst in instances {
        for p in inst.selected() {
            let mut target = Vec::with_capacity(inst.query.len() + 2);
            target.push(BOS);
            target.extend(vocab.encode(&inst.query));
            target.push(EOS);
            pairs.push(TrainingPair {
                source: vocab.encode(&p.tokens),
                target,
            });
        }
    }
    pairs
}

/// Token sequences a vocabulary should be built from: queries and selected passages.
pub fn training_sequences(instances: &[DataInstance]) -> Vec<&[String]> {
    let mut out: Vec<&[String]> = Vec::new();
    for inst in instances {
        let mut any = false;
        for p in inst.selected() {
            out.push(&p.tokens);
            any = true;
        }
        if any {
            out.push(&inst.query);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct RawPassage {
    text: String,
    is_selected: u8,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    query_id: serde_json::Value,
    query: String,
    passages: Vec<RawPassage>,
}

pub fn load_dataset(path: &Path) -> Result<Vec<DataInstance>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(f), path)
}

pub fn parse_dataset<R: BufRead>(reader: R, path: &Path) -> Result<Vec<DataInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |message: String| Error::Data {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let raw: RawInstance = serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        let query_id = match raw.query_id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(data_err(format!("query_id must be a string, got {other}"))),
        };
        let query = tokenize(&raw.query);
        if query.is_empty() {
            return Err(data_err("empty query".into()));
        }
        if raw.passages.is_empty() {
            return Err(data_err("instance has no passages".into()));
        }
        let mut passages = Vec::with_capacity(raw.passages.len());
        for (j, p) in raw.passages.into_iter().enumerate() {
            let is_selected = match p.is_selected {
                0 => false,
                1 => true,
                v => return Err(data_err(format!("passage {j}: is_selected must be 0 or 1, got {v}"))),
            };
            let tokens = tokenize(&p.text);
            if tokens.is_empty() {
                return Err(data_err(format!("passage {j} is empty")));
            }
            passages.push(Passage {
                text: p.text,
                tokens,
                is_selected,
            });
        }
        out.push(DataInstance {
            query_id,
            query_text: raw.query,
            query,
            passages,
        });
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, instances: &[DataInstance]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for inst in instances {
        let raw = RawInstance {
            query_id: serde_json::Value::String(inst.query_id.clone()),
            query: inst.query_text.clone(),
            passages: inst
                .passages
                .iter()
                .map(|p| RawPassage {
                    text: p.text.clone(),
                    is_selected: p.is_selected as u8,
                })
                .collect(),
        };
        let line = serde_json::to_string(&raw).expect("dataset rows serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
