//! Little-endian binary blob container shared by weight, codebook, feature
//! and model files.
//!
//! ```text
//! "SNTW" | version u32 | blob count u32
//! per blob: name length u16 | UTF-8 name | rank u8 | dims u32 x rank | f32 x prod(dims)
//! ```

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MAGIC: &[u8; 4] = b"SNTW";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Blob {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let want: usize = dims.iter().map(|&d| d as usize).product();
        if want != data.len() {
            return Err(Error::shape(format!(
                "blob dims {dims:?} need {want} values, got {}",
                data.len()
            )));
        }
        Ok(Blob { dims, data })
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }
}

/// Ordered set of named blobs. Insertion order is preserved on disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    blobs: IndexMap<String, Blob>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a blob; a name may only be used once.
    pub fn insert(&mut self, name: impl Into<String>, blob: Blob) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::invalid(format!("blob name too long: {} bytes", name.len())));
        }
        if blob.dims.len() > u8::MAX as usize {
            return Err(Error::invalid(format!("blob {name} has too many dims")));
        }
        if self.blobs.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate blob name {name:?}")));
        }
        self.blobs.insert(name, blob);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Blob> {
        self.blobs.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Blob> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("missing blob {name:?}")))
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Blob)> {
        self.blobs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blobs.keys().map(String::as_str)
    }

    /// Stores a `u64` bit-exactly as two f32 bit patterns (low word first).
    pub fn insert_u64(&mut self, name: impl Into<String>, value: u64) -> Result<()> {
        let lo = f32::from_bits(value as u32);
        let hi = f32::from_bits((value >> 32) as u32);
        self.insert(name, Blob::new(vec![2], vec![lo, hi])?)
    }

    pub fn get_u64(&self, name: &str) -> Result<u64> {
        let blob = self.require(name)?;
        match blob.data[..] {
            [lo, hi] if blob.dims == [2] => {
                Ok(u64::from(lo.to_bits()) | (u64::from(hi.to_bits()) << 32))
            }
            _ => Err(Error::invalid(format!("blob {name:?} is not a u64 field"))),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload: usize = self
            .blobs
            .iter()
            .map(|(n, b)| 3 + n.len() + 4 * b.dims.len() + 4 * b.data.len())
            .sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, blob) in &self.blobs {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(blob.dims.len() as u8);
            for d in &blob.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &blob.data {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], source: &str) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            source,
        };
        let magic = r.take(4, "header")?;
        if magic != MAGIC {
            return Err(Error::format(source, "byte 0", "bad magic, expected \"SNTW\""));
        }
        let version = r.u32("header")?;
        if version != VERSION {
            return Err(Error::format(
                source,
                "byte 4",
                format!("unsupported version {version}"),
            ));
        }
        let count = r.u32("header")?;
        let mut container = Container::new();
        for i in 0..count {
            let at = r.pos;
            let ctx = format!("blob #{i}");
            let name_len = r.u16(&ctx)? as usize;
            let name = std::str::from_utf8(r.take(name_len, &ctx)?)
                .map_err(|_| Error::format(source, format!("byte {at}"), "blob name is not UTF-8"))?
                .to_string();
            let ctx = format!("blob {name:?}");
            let rank = r.take(1, &ctx)?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32(&ctx)?);
            }
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let raw = r.take(n.saturating_mul(4), &ctx)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_bits(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            if container.blobs.contains_key(&name) {
                return Err(Error::format(
                    source,
                    format!("byte {at}"),
                    format!("duplicate blob name {name:?}"),
                ));
            }
            container.blobs.insert(name, Blob { dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(
                source,
                format!("byte {}", r.pos),
                "trailing bytes after last blob",
            ));
        }
        Ok(container)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::decode(&bytes, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.encode())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, ctx: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.source,
                format!("byte {}", self.pos),
                format!("truncated file while reading {ctx}"),
            )),
        }
    }

    fn u16(&mut self, ctx: &str) -> Result<u16> {
        let b = self.take(2, ctx)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, ctx: &str) -> Result<u32> {
        let b = self.take(4, ctx)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
