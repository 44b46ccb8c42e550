//! WVOX binary grid format.
//!
//! ```text
//! "WVOX" | u32 LE version (=1) | u32 LE N | ceil(N^3/8) bytes occupancy
//!        [ | u32 LE length | UTF-8 JSON metadata ]
//! ```
//! Bit `i` of payload byte `b` holds cell `8b + i`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::grid::{check_supported_resolution, GridMeta, VoxelGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WVOX";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

pub fn payload_len(resolution: usize) -> usize {
    resolution.pow(3).div_ceil(8)
}

pub fn encode_grid(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len(grid.resolution()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.resolution() as u32).to_le_bytes());
    let mut payload = vec![0u8; payload_len(grid.resolution())];
    for (i, _) in grid.cells().iter().enumerate().filter(|(_, &c)| c) {
        payload[i / 8] |= 1 << (i % 8);
    }
    out.extend_from_slice(&payload);
    if !grid.meta().is_empty() {
        let json = serde_json::to_vec(grid.meta()).expect("metadata serializes");
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_grid(bytes: &[u8]) -> Result<VoxelGrid> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing WVOX magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corruption("truncated WVOX header".into()));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported WVOX version {version}")));
    }
    let n = read_u32(bytes, 8) as usize;
    check_supported_resolution(n)?;
    let len = payload_len(n);
    let payload = bytes
        .get(HEADER_LEN..HEADER_LEN + len)
        .ok_or_else(|| Error::Corruption(format!("payload shorter than {len} bytes")))?;
    let cells = (0..n.pow(3))
        .map(|i| payload[i / 8] >> (i % 8) & 1 == 1)
        .collect();
    let mut grid = VoxelGrid::from_cells(n, cells)?;

    let rest = &bytes[HEADER_LEN + len..];
    if !rest.is_empty() {
        if rest.len() < 4 {
            return Err(Error::Corruption("truncated metadata length".into()));
        }
        let meta_len = read_u32(rest, 0) as usize;
        if rest.len() != 4 + meta_len {
            return Err(Error::Corruption(format!(
                "metadata block declares {meta_len} bytes, found {}",
                rest.len() - 4
            )));
        }
        let meta: GridMeta = serde_json::from_slice(&rest[4..])
            .map_err(|e| Error::Corruption(format!("metadata: {e}")))?;
        grid = grid.with_meta(meta);
    }
    Ok(grid)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Corruption(m) => Error::Corruption(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes via a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .map(|n| format!(".{}.tmp", n.to_string_lossy()))
        .unwrap_or_else(|| ".tmp".into());
    tmp.set_file_name(name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_grid(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_grid(grid))
}
