//! Checkpoint container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      4 bytes  "NGCK"
//! version    u8       1
//! meta_len   u32      length of the metadata text
//! metadata   meta_len bytes of UTF-8 (TOML)
//! count      u32      number of blobs
//! per blob:
//!   name_len u16, name UTF-8
//!   ndim     u8,  dims: ndim × u32
//!   data     product(dims) × f32
//! ```
//!
//! Model weights and optimizer moments are stored as blobs; scalar state
//! (epoch, optimizer step counts, configuration) lives in the metadata.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NGCK";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: String,
    pub blobs: Vec<Blob>,
}

impl Checkpoint {
    pub fn blob(&self, name: &str) -> Result<&Blob> {
        self.blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no blob {name:?}")))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        let meta = self.metadata.as_bytes();
        out.extend_from_slice(&u32::try_from(meta.len()).map_err(too_big)?.to_le_bytes());
        out.extend_from_slice(meta);
        out.extend_from_slice(&u32::try_from(self.blobs.len()).map_err(too_big)?.to_le_bytes());
        for b in &self.blobs {
            if b.shape.iter().product::<usize>() != b.data.len() {
                return Err(Error::Shape(format!(
                    "blob {} shape {:?} does not hold {} values",
                    b.name,
                    b.shape,
                    b.data.len()
                )));
            }
            let name = b.name.as_bytes();
            out.extend_from_slice(&u16::try_from(name.len()).map_err(too_big)?.to_le_bytes());
            out.extend_from_slice(name);
            out.push(u8::try_from(b.shape.len()).map_err(too_big)?);
            for &d in &b.shape {
                out.extend_from_slice(&u32::try_from(d).map_err(too_big)?.to_le_bytes());
            }
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.take(1)?[0];
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let metadata = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| Error::Format("checkpoint metadata is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut blobs = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("blob name is not UTF-8".into()))?;
            let ndim = r.take(1)?[0] as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = r
                .take(n.checked_mul(4).ok_or_else(|| Error::Format("blob too large".into()))?)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blobs.push(Blob { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last blob",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { metadata, blobs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

fn too_big<E>(_: E) -> Error {
    Error::Format("value too large for the checkpoint format".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "checkpoint truncated: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::decode(b"NGTS\x01").is_err());
        let ck = Checkpoint {
            metadata: "epoch = 3".into(),
            blobs: vec![Blob {
                name: "g.dense.weights".into(),
                shape: vec![2, 2],
                data: vec![1.0, 2.0, 3.0, 4.0],
            }],
        };
        let bytes = ck.encode().unwrap();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::decode(&extra).is_err());
        assert_eq!(ck.blob("g.dense.weights").unwrap().data[3], 4.0);
        assert!(ck.blob("missing").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(meta in "[a-z =0-9\n]{0,40}", dims in proptest::collection::vec(1usize..4, 0..3), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| (i as f32 + seed as f32).sin()).collect();
            let ck = Checkpoint { metadata: meta, blobs: vec![Blob { name: "w".into(), shape: dims, data }] };
            prop_assert_eq!(Checkpoint::decode(&ck.encode().unwrap()).unwrap(), ck);
        }
    }
}
