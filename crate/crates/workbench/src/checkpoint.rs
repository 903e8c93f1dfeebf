//! Checkpoint container.
//!
//! ```text
//! "CTRS" | version u32 | count u32 |
//!   count × (name_len u32 | name utf-8 | ndim u32 | dims u32[ndim] | f32[prod(dims)])
//! | config hash [32]
//! ```
//! All integers and floats are little-endian.

use std::collections::BTreeSet;
use std::path::Path;

use citrus_core::nn::{LoadReport, Model, ParamStore};
use citrus_core::Tensor;

use crate::error::{Result, WbError};
use crate::fsutil::{read, write_atomic};

pub const MAGIC: &[u8; 4] = b"CTRS";
pub const VERSION: u32 = 1;

/// Named tensors plus the hash of the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<(String, Tensor<f32>)>,
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn from_params(params: &ParamStore<f32>, config_hash: [u8; 32]) -> Self {
        Checkpoint {
            entries: params
                .entries()
                .iter()
                .map(|e| (e.name.clone(), e.value.clone()))
                .collect(),
            config_hash,
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Restore matching parameters of `model`.
    pub fn apply(&self, model: &mut Model<f32>) -> Result<LoadReport> {
        Ok(model
            .params
            .load_named(self.entries.iter().map(|(n, t)| (n.as_str(), t)))?)
    }

    /// A parameter store holding exactly these tensors.
    pub fn to_store(&self, template: &ParamStore<f32>) -> Result<ParamStore<f32>> {
        let mut store = template.clone();
        store.load_named(self.entries.iter().map(|(n, t)| (n.as_str(), t)))?;
        Ok(store)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32_of(self.entries.len())?.to_le_bytes());
        for (name, t) in &self.entries {
            if !seen.insert(name.as_str()) {
                return Err(WbError::format(format!(
                    "duplicate checkpoint entry {name}"
                )));
            }
            out.extend_from_slice(&u32_of(name.len())?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&u32_of(t.ndim())?.to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&u32_of(d)?.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.config_hash);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(WbError::format("not a checkpoint: bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(WbError::format(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 16));
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| WbError::format("checkpoint entry name is not UTF-8"))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(WbError::format(format!(
                    "duplicate checkpoint entry {name}"
                )));
            }
            let ndim = r.u32()? as usize;
            let dims = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| WbError::format("dims overflow"))?;
            let payload = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| WbError::format("payload overflow"))?,
            )?;
            let data = crate::dataset::decode_f32(payload);
            entries.push((name, Tensor::from_vec(&dims, data)?));
        }
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(r.take(32)?);
        if r.pos != bytes.len() {
            return Err(WbError::format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            entries,
            config_hash,
        })
    }
}

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| WbError::format(format!("{v} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                WbError::format(format!(
                    "checkpoint truncated at byte {} (need {n} more)",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read(path)?).map_err(|e| match e {
        WbError::Format(m) => WbError::format(format!("{}: {m}", path.display())),
        other => other,
    })
}
