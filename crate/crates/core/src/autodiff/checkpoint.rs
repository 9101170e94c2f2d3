//! Binary checkpoint: `EGOW` magic, u32 version, a length-prefixed JSON
//! manifest, then named little-endian `f64` tensors.

use std::io::{Read, Write};

use super::nn::ParameterStore;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EGOW";
const VERSION: u32 = 1;

pub type TensorRecord = (String, Vec<usize>, Vec<f64>);

pub fn write_checkpoint<W: Write>(mut w: W, manifest: &str, store: &ParameterStore) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(manifest.len() as u32).to_le_bytes())?;
    w.write_all(manifest.as_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, t) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.ndim() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.numel() * 8);
        for v in t.data().iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.source,
                format!("byte {}", self.pos),
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize, what: &str) -> Result<String> {
        let at = self.pos;
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| Error::parse(self.source, format!("byte {at}"), format!("{what} is not UTF-8")))
    }
}

/// Parses a checkpoint into its manifest and tensor records.
pub fn parse_checkpoint(bytes: &[u8], source: &str) -> Result<(String, Vec<TensorRecord>)> {
    let mut r = Reader { bytes, pos: 0, source };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format(format!("{source}: not a model checkpoint (bad magic)")));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("{source}: unsupported checkpoint version {version}")));
    }
    let mlen = r.u32("manifest length")? as usize;
    let manifest = r.string(mlen, "manifest")?;
    let count = r.u32("tensor count")? as usize;
    let mut records = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let nlen = r.u32("name length")? as usize;
        let name = r.string(nlen, "tensor name")?;
        let ndim = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(ndim.min(16));
        for _ in 0..ndim {
            shape.push(r.u64("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format(format!("{source}: tensor `{name}` is too large")))?;
        let raw = r.take(n, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((name, shape, data));
    }
    if r.pos != bytes.len() {
        return Err(Error::parse(source, format!("byte {}", r.pos), "trailing bytes after last tensor"));
    }
    Ok((manifest, records))
}

pub fn read_checkpoint<R: Read>(mut reader: R, source: &str) -> Result<(String, Vec<TensorRecord>)> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(source, e))?;
    parse_checkpoint(&bytes, source)
}
