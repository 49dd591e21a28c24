//! Flat parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"FCKP"
//! version u32
//! header  u32 length + UTF-8 bytes (free-form, may be empty)
//! count   u32
//! count × { u32 name length, name bytes, u32 rank, rank × u64 dims,
//!           prod(dims) × f64 }
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Parameter, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FCKP";
pub const FORMAT_VERSION: u32 = 1;

/// Decoded container contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: String,
    pub params: Vec<Parameter>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(header: &str, params: &[Parameter]) -> Result<Vec<u8>> {
    let floats: usize = params.iter().map(|p| p.value.len()).sum();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * floats + 64 * params.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, header.len())?;
    out.extend_from_slice(header.as_bytes());
    put_u32(&mut out, params.len())?;
    for p in params {
        put_u32(&mut out, p.name.len())?;
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.value.shape().len())?;
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {} reading {what}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("not a parameter checkpoint (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::Format(format!(
            "checkpoint format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let header = r.string("header")?;
    let count = r.u32("parameter count")?;
    let mut params = Vec::new();
    for _ in 0..count {
        let name = r.string("parameter name")?;
        let rank = r.u32("rank")?;
        let mut shape = Vec::with_capacity(rank.min(8));
        let mut len: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64("dimension")?)
                .map_err(|_| Error::Format(format!("{name}: dimension too large")))?;
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::Format(format!("{name}: element count overflows")))?;
            shape.push(d);
        }
        let raw = r.take(
            len.checked_mul(8)
                .ok_or_else(|| Error::Format(format!("{name}: element count overflows")))?,
            "parameter data",
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| {
                let mut a = [0u8; 8];
                a.copy_from_slice(c);
                f64::from_le_bytes(a)
            })
            .collect();
        params.push(Parameter::new(name, Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { header, params })
}
