//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | field                                          |
//! |-------|------------------------------------------------|
//! | 4     | magic `GRDX`                                   |
//! | 4     | format version (`u32`, currently 1)            |
//! | 1     | head: 0 linear, 1 rotational, 2 mirror         |
//! | 1     | representation: 0 absolute, 1 egocentric       |
//! | 1     | method: 0 Q-learning, 1 REINFORCE              |
//! | 1     | reserved, 0                                    |
//! | 4     | board side `g` (`u32`)                         |
//! | 4     | model grid side `x` (`u32`)                    |
//! | 8     | run seed (`u64`)                               |
//! | 4     | embedding length `n` (`u32`), then `n` x `f64` |
//! | 4     | head length `m` (`u32`), then `m` x `f64`      |

use std::path::Path;

use crate::encoding::{EmbeddingTable, Representation};
use crate::error::{Error, Result};
use crate::gridworld::GRID_SIZE;
use crate::model::{HeadKind, Model};
use crate::training::Method;

pub const MAGIC: &[u8; 4] = b"GRDX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub method: Method,
    pub seed: u64,
    pub model: Model,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let emb = self.model.embedding().as_slice();
        let head = self.model.head_weights();
        let mut out = Vec::with_capacity(36 + 8 * (emb.len() + head.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.model.kind().code());
        out.push(match self.model.representation() {
            Representation::Absolute => 0,
            Representation::Egocentric => 1,
        });
        out.push(self.method.code());
        out.push(0);
        out.extend_from_slice(&(GRID_SIZE as u32).to_le_bytes());
        out.extend_from_slice(&(self.model.side() as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for block in [emb, head] {
            out.extend_from_slice(&(block.len() as u32).to_le_bytes());
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = HeadKind::from_code(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown head".into()))?;
        let representation = match r.u8()? {
            0 => Representation::Absolute,
            1 => Representation::Egocentric,
            other => return Err(Error::Checkpoint(format!("unknown representation {other}"))),
        };
        let method = Method::from_code(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown method".into()))?;
        r.u8()?;
        let g = r.u32()? as usize;
        let x = r.u32()? as usize;
        if g != GRID_SIZE || x != representation.side() {
            return Err(Error::Checkpoint(format!(
                "grid sizes g={g}, x={x} do not fit a {representation} model"
            )));
        }
        let seed = r.u64()?;
        let emb = r.block()?;
        let head = r.block()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let expected = kind.param_count(x);
        if head.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{kind} head on side {x} needs {expected} weights, found {}",
                head.len()
            )));
        }
        let model = Model::from_parts(kind, representation, EmbeddingTable::from_slice(&emb)?, head)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { method, seed, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> std::result::Result<Self, LoadError> {
        let bytes = std::fs::read(path)?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] Error),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn block(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
