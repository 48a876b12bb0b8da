//! A small named-array archive: a JSON header plus raw little-endian f64
//! blocks. Used for model checkpoints and trajectory bundles.

use crate::error::{DistillError, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"NARCH001";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

/// In-memory archive of named f64 arrays plus free-form JSON metadata.
#[derive(Debug, Clone)]
pub struct Archive {
    pub meta: serde_json::Value,
    arrays: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Archive {
    pub fn new(meta: serde_json::Value) -> Self {
        Archive {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> Result<()> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(DistillError::Archive(format!(
                "array {name}: shape {shape:?} implies {expected} values, got {}",
                data.len()
            )));
        }
        if self.arrays.iter().any(|(n, _, _)| n == name) {
            return Err(DistillError::Archive(format!("duplicate array name {name}")));
        }
        self.arrays.push((name.to_string(), shape, data));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.arrays
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
            .ok_or_else(|| DistillError::Archive(format!("missing array {name}")))
    }

    pub fn names(&self) -> Vec<&str> {
        self.arrays.iter().map(|(n, _, _)| n.as_str()).collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut entries = Vec::new();
        let mut offset = 0u64;
        for (name, shape, data) in &self.arrays {
            entries.push(ArrayEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
                len: data.len() as u64,
            });
            offset += (data.len() * 8) as u64;
        }
        let header = Header {
            meta: self.meta.clone(),
            arrays: entries,
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| DistillError::Archive(format!("header encode: {e}")))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for (_, _, data) in &self.arrays {
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DistillError::Archive("bad magic".into()));
        }
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| DistillError::Archive(format!("header decode: {e}")))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let mut arrays = Vec::new();
        for entry in header.arrays {
            let start = entry.offset as usize;
            let end = start + entry.len as usize * 8;
            if end > rest.len() {
                return Err(DistillError::Archive(format!(
                    "array {} extends past end of file",
                    entry.name
                )));
            }
            let data: Vec<f64> = rest[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let expected: usize = entry.shape.iter().product();
            if expected != data.len() {
                return Err(DistillError::Archive(format!(
                    "array {}: shape/length mismatch",
                    entry.name
                )));
            }
            arrays.push((entry.name, entry.shape, data));
        }
        Ok(Archive {
            meta: header.meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }
}
