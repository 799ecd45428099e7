// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary checkpoint format.
//!
//! ```text
//! "TCCK" | version u32 | input_len hidden dense classes seed (u64 each)
//! | metadata count u32 | (key, value) length-prefixed UTF-8 pairs
//! | tensor count u32 | per tensor: name, ndim u32, dims u64.., values f64..
//! | SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{EncoderDims, EncoderParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TCCK";
const VERSION: u32 = 1;

/// Trained parameters plus the seed and free-form metadata needed to
/// reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let d = self.params.dims;
        for v in [d.input_len, d.hidden, d.dense, d.classes] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        let shapes = self.params.shapes();
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for ((name, values), shape) in tensors.into_iter().zip(shapes) {
            put_str(&mut out, name);
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for s in shape {
                out.extend_from_slice(&(s as u64).to_le_bytes());
            }
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let dims = EncoderDims {
            input_len: r.usize()?,
            hidden: r.usize()?,
            dense: r.usize()?,
            classes: r.usize()?,
        };
        let seed = r.u64()?;
        let mut metadata = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            metadata.insert(k, v);
        }
        let mut params = EncoderParams::zeros(dims);
        let shapes = params.shapes();
        let count = r.u32()? as usize;
        if count != shapes.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {count}",
                shapes.len()
            )));
        }
        for ((name, dst), shape) in params.tensors_mut().into_iter().zip(shapes) {
            let found = r.string()?;
            if found != name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {name}, found {found}"
                )));
            }
            let ndim = r.u32()? as usize;
            let stored = (0..ndim).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            if stored != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {stored:?}, expected {shape:?}"
                )));
            }
            for v in dst.iter_mut() {
                *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            params,
            seed,
            metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let dims = EncoderDims {
            input_len: 4,
            hidden: 3,
            dense: 5,
            classes: 2,
        };
        let mut metadata = BTreeMap::new();
        metadata.insert("segment_count".to_string(), "7".to_string());
        metadata.insert("mask_ratio".to_string(), "0.15".to_string());
        Checkpoint {
            params: EncoderParams::init(dims, 3),
            seed: 3,
            metadata,
        }
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.ckpt");
        let c = sample();
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample().to_bytes();
        bytes[40] ^= 1;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Checkpoint(_))
        ));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..10]),
            Err(Error::Checkpoint(_))
        ));
    }
}
