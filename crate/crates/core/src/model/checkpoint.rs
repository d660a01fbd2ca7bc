//! Binary checkpoint format, all integers big-endian:
//!
//! ```text
//! "SOVC" | version u32 | header_len u32 | header JSON {config, vocab}
//! | tensor_count u32 | tensor*
//! tensor = name_len u32 | name utf-8 | rank u32 | dims u32* | f32 payload
//! ```
//!
//! Optimizer moments live in a sidecar (`<checkpoint>.state`):
//! `"SOVS" | version u32 | step u64 | tensor_count u32 | (len u32 | m f64* | v f64*)*`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::CaptionModel;
use super::params::{param_shapes, ParamStore};
use super::tensor::Mat;
use super::train::AdamW;
use super::vocab::Vocabulary;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SOVC";
pub const VERSION: u32 = 1;
const STATE_MAGIC: &[u8; 4] = b"SOVS";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: serde_json::Value,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_be_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format(format!("{}: {} (at byte {})", self.path.display(), message.into(), self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!("truncated: need {n} more bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.fail(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn checkpoint_bytes(model: &CaptionModel) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        vocab: serde_json::from_str(&model.vocab.to_json()).expect("vocabulary JSON"),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    put_u32(&mut out, header.len());
    out.extend_from_slice(&header);
    put_u32(&mut out, model.params.len());
    for (name, m) in model.params.iter() {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, 2);
        put_u32(&mut out, m.rows);
        put_u32(&mut out, m.cols);
        for v in &m.data {
            out.extend_from_slice(&(*v as f32).to_be_bytes());
        }
    }
    out
}

pub fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<CaptionModel> {
    let mut r = Reader { buf: bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(r.fail("bad magic, not a checkpoint"));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let n = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(n)?).map_err(|e| Error::parse(path.display().to_string(), e))?;
    header.config.validate()?;
    let vocab = Vocabulary::from_json(&header.vocab.to_string())?;
    let expected = param_shapes(&header.config, vocab.len());
    let count = r.u32()?;
    if count != expected.len() {
        return Err(r.fail(format!("{count} tensors, configuration implies {}", expected.len())));
    }
    let mut entries = Vec::with_capacity(count);
    for (name, rows, cols) in expected {
        let len = r.u32()?;
        let got = std::str::from_utf8(r.take(len)?).map_err(|_| r.fail("tensor name is not UTF-8"))?;
        if got != name {
            return Err(r.fail(format!("tensor {got:?} where {name:?} was expected")));
        }
        let rank = r.u32()?;
        let dims: Vec<usize> = (0..rank).map(|_| r.u32()).collect::<Result<_>>()?;
        if dims != [rows, cols] {
            return Err(r.fail(format!("tensor {name} has dims {dims:?}, expected [{rows}, {cols}]")));
        }
        let payload = r.take(rows * cols * 4)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_be_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        entries.push((name, Mat::from_vec(rows, cols, data)));
    }
    r.finish()?;
    Ok(CaptionModel {
        config: header.config,
        vocab,
        params: ParamStore::new(entries),
    })
}

/// Writes atomically via a temporary sibling file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(model: &CaptionModel, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(model))
}

pub fn load_checkpoint(path: &Path) -> Result<CaptionModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes, path)
}

pub fn state_path(checkpoint: &Path) -> PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".state");
    PathBuf::from(p)
}

pub fn save_optimizer_state(opt: &AdamW, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&opt.step.to_be_bytes());
    put_u32(&mut out, opt.m.len());
    for (m, v) in opt.m.iter().zip(&opt.v) {
        put_u32(&mut out, m.len());
        for x in m.iter().chain(v) {
            out.extend_from_slice(&x.to_be_bytes());
        }
    }
    write_atomic(path, &out)
}

pub fn load_optimizer_state(path: &Path) -> Result<AdamW> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &bytes, pos: 0, path };
    if r.take(4)? != STATE_MAGIC {
        return Err(r.fail("bad magic, not an optimizer state file"));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let step = r.u64()?;
    let count = r.u32()?;
    let (mut ms, mut vs) = (Vec::with_capacity(count), Vec::with_capacity(count));
    let read = |r: &mut Reader, n: usize| -> Result<Vec<f64>> {
        Ok(r.take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    for _ in 0..count {
        let n = r.u32()?;
        ms.push(read(&mut r, n)?);
        vs.push(read(&mut r, n)?);
    }
    r.finish()?;
    Ok(AdamW { step, m: ms, v: vs })
}

impl CaptionModel {
    /// Rounds every parameter through `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for i in 0..self.params.len() {
            for v in &mut self.params.value_mut(i).data {
                *v = f64::from(*v as f32);
            }
        }
    }
}
