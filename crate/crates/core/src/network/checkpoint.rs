//! Checkpoint container:
//! `"WCKP" | u32 LE version | u32 LE header length | JSON header | f64 LE values`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ArchConfig;
use super::params::{ModelParams, ParamLayout};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::voxel::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ArchConfig,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let header = Header {
        config: params.config().clone(),
        dtype: T::DTYPE.to_owned(),
        tensors: params
            .layout()
            .tensors()
            .into_iter()
            .map(|(name, range, shape)| TensorEntry {
                name,
                shape,
                offset: range.start,
                len: range.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in params.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<ModelParams<T>> {
    if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let json = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::Corruption("truncated checkpoint header".into()))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::Corruption(format!("checkpoint header: {e}")))?;
    header.config.validate()?;

    let layout = ParamLayout::new(&header.config);
    let expected = layout.tensors();
    if expected.len() != header.tensors.len() {
        return Err(Error::Shape(format!(
            "checkpoint has {} tensors, config implies {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    for ((name, range, shape), t) in expected.iter().zip(&header.tensors) {
        if *name != t.name || *shape != t.shape || range.start != t.offset || range.len() != t.len {
            return Err(Error::Shape(format!(
                "tensor {} {:?} does not match config ({name} {shape:?})",
                t.name, t.shape
            )));
        }
    }

    let body = &bytes[12 + hlen..];
    if body.len() != 8 * layout.total {
        return Err(Error::Corruption(format!(
            "checkpoint holds {} bytes of values, expected {}",
            body.len(),
            8 * layout.total
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ModelParams::from_values(header.config, values)
}

pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(params))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
