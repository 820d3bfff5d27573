//! Binary checkpoint format.
//!
//! `"MSQG"`, u32 version, u32 tensor count, then per tensor: u16 name
//! length, UTF-8 name, u8 ndim, u32 per dim, row-major f32 payload. All
//! integers and floats are little-endian. Model hyperparameters travel as an
//! extra tensor named `hparams`.

use std::fs;
use std::path::Path;

use super::{ModelConfig, Seq2SeqModel};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MSQG";
pub const CHECKPOINT_VERSION: u32 = 1;
const HPARAMS: &str = "hparams";

fn encode(model: &Seq2SeqModel) -> Result<Vec<u8>> {
    let c = model.config();
    let hp = Tensor::row(
        [
            c.vocab_size,
            c.embed_dim,
            c.hidden_dim,
            c.encoder_layers,
            c.max_source_len,
        ]
        .iter()
        .map(|&x| x as f32)
        .collect(),
    )?;
    let entries: Vec<(&str, &Tensor)> = std::iter::once((HPARAMS, &hp))
        .chain(model.param_names().iter().map(String::as_str).zip(model.params()))
        .collect();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.ndim() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &Seq2SeqModel, path: &Path) -> Result<()> {
    let bytes = encode(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Seq2SeqModel, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| "bad magic".to_string())? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()? as usize;
    let mut named = Vec::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "tensor name is not UTF-8".to_string())?
            .to_string();
        let ndim = r.u8()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or("tensor too large")?;
        let raw = r.take(numel.checked_mul(4).ok_or("tensor too large")?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| format!("{name}: {e}"))?;
        named.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let pos = named.iter().position(|(n, _)| n == HPARAMS).ok_or("missing hparams")?;
    let (_, hp) = named.remove(pos);
    let hp = hp.data();
    if hp.len() != 5 {
        return Err("malformed hparams".into());
    }
    let config = ModelConfig {
        vocab_size: hp[0] as usize,
        embed_dim: hp[1] as usize,
        hidden_dim: hp[2] as usize,
        encoder_layers: hp[3] as usize,
        max_source_len: hp[4] as usize,
    };
    Seq2SeqModel::from_named(config, named).map_err(|e| e.to_string())
}

pub fn load_checkpoint(path: &Path) -> Result<Seq2SeqModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}
