//! Named-tensor container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   8 bytes  "SPFCKPT\0"
//! version u8       1
//! prec    u8       0 = f32, 1 = f64
//! meta    u64 len + UTF-8 bytes (free-form, JSON by convention)
//! count   u64
//! count x { name: u64 len + UTF-8, ndim: u64, dims: ndim x u64, data }
//! ```

use std::fs;
use std::path::Path;

use super::tensor::{Precision, Real, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SPFCKPT\0";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint<T: Real>(meta: &str, entries: &[(String, Tensor<T>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(match T::PRECISION {
        Precision::Single => 0,
        Precision::Double => 1,
    });
    put_bytes(&mut out, meta.as_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (name, t) in entries {
        put_bytes(&mut out, name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            x.to_le(&mut out);
        }
    }
    out
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<(String, Vec<(String, Tensor<T>)>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.take(1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let prec = match r.take(1)?[0] {
        0 => Precision::Single,
        1 => Precision::Double,
        p => return Err(Error::Format(format!("bad precision flag {p}"))),
    };
    if prec != T::PRECISION {
        return Err(Error::Format(format!(
            "checkpoint stores {prec:?} precision, requested {:?}",
            T::PRECISION
        )));
    }
    let meta = r.string()?;
    let count = r.u64()? as usize;
    let size = std::mem::size_of::<T>();
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name = r.string()?;
        let ndim = r.u64()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(16));
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(size).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = raw.chunks_exact(size).map(T::from_le).collect();
        entries.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok((meta, entries))
}

pub fn save_checkpoint<T: Real>(path: impl AsRef<Path>, meta: &str, entries: &[(String, Tensor<T>)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(meta, entries)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(String, Vec<(String, Tensor<T>)>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    out.extend_from_slice(b);
}

/// Cursor over a little-endian byte buffer; shared with the hierarchy cache.
pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn string(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8".into()))
    }
}
