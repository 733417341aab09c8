//! Binary tensor container.
//!
//! ```text
//! "EYTH" | version: u16 LE | header_len: u32 LE | header: UTF-8 JSON
//!        | zero padding to a 16-byte boundary | blob
//! ```
//!
//! The header lists `{name, shape, offset}` per tensor (offsets are relative
//! to the blob start and 16-byte aligned) plus the config fingerprint. Tensor
//! data is little-endian `f32`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EYTH";
pub const VERSION: u16 = 1;
const ALIGN: usize = 16;
const PREFIX: usize = 4 + 2 + 4;
const MAX_HEADER: usize = 16 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightContainer {
    pub fingerprint: String,
    pub config: Option<serde_json::Value>,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn align_up(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

fn err(msg: impl Into<String>) -> GazeError {
    GazeError::Container(msg.into())
}

impl WeightContainer {
    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            if !seen.insert(name.as_str()) {
                return Err(err(format!("duplicate tensor {name}")));
            }
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset = align_up(offset + t.len() * 4);
        }
        let header = ContainerHeader {
            fingerprint: self.fingerprint.clone(),
            config: self.config.clone(),
            tensors: entries,
        };
        let header = serde_json::to_vec(&header).map_err(|e| err(e.to_string()))?;
        let blob_start = align_up(PREFIX + header.len());

        let mut out = Vec::with_capacity(blob_start + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.resize(blob_start, 0);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.resize(align_up(out.len() - blob_start) + blob_start, 0);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREFIX {
            return Err(err("truncated prefix"));
        }
        if &bytes[..4] != MAGIC {
            return Err(err("bad magic bytes"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        if header_len > MAX_HEADER || PREFIX + header_len > bytes.len() {
            return Err(err("truncated header"));
        }
        let header: ContainerHeader = serde_json::from_slice(&bytes[PREFIX..PREFIX + header_len])
            .map_err(|e| err(format!("header: {e}")))?;
        let blob_start = align_up(PREFIX + header_len);
        let blob = bytes.get(blob_start..).unwrap_or(&[]);

        let mut seen = BTreeSet::new();
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            if !seen.insert(e.name.as_str()) {
                return Err(err(format!("duplicate tensor {}", e.name)));
            }
            if e.offset % ALIGN != 0 {
                return Err(err(format!("tensor {} is not 16-byte aligned", e.name)));
            }
            let count = e
                .shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .filter(|c| *c > 0)
                .ok_or_else(|| err(format!("tensor {} has an invalid shape", e.name)))?;
            let end = count
                .checked_mul(4)
                .and_then(|n| n.checked_add(e.offset))
                .ok_or_else(|| err(format!("tensor {} overflows", e.name)))?;
            let raw = blob
                .get(e.offset..end)
                .ok_or_else(|| err(format!("blob truncated inside tensor {}", e.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
        }
        Ok(Self {
            fingerprint: header.fingerprint,
            config: header.config,
            tensors,
        })
    }
}
