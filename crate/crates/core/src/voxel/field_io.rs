//! WFLD probability-field format.
//!
//! ```text
//! "WFLD" | u32 LE version (=1) | u32 LE N | N^3 f64 LE values
//! ```

use std::fs;
use std::path::Path;

use super::grid::{check_supported_resolution, DenseField};
use super::io::write_atomic;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FIELD_MAGIC: &[u8; 4] = b"WFLD";
const FIELD_VERSION: u32 = 1;

pub fn encode_field<T: Scalar>(field: &DenseField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * field.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&(field.resolution() as u32).to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_field<T: Scalar>(bytes: &[u8]) -> Result<DenseField<T>> {
    if bytes.len() < 4 || &bytes[..4] != FIELD_MAGIC {
        return Err(Error::Format("missing WFLD magic".into()));
    }
    if bytes.len() < 12 {
        return Err(Error::Corruption("truncated WFLD header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FIELD_VERSION {
        return Err(Error::Format(format!("unsupported WFLD version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    check_supported_resolution(n)?;
    let body = &bytes[12..];
    if body.len() != 8 * n.pow(3) {
        return Err(Error::Corruption(format!("expected {} value bytes, found {}", 8 * n.pow(3), body.len())));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    DenseField::from_values(n, values).map_err(|e| Error::Corruption(e.to_string()))
}

pub fn save_field<T: Scalar>(field: &DenseField<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_field(field))
}

pub fn load_field<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseField<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}
