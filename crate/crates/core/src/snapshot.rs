//! Binary density snapshots.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `LANDSNAP`                       |
//! | 8      | 4    | version (u32, currently 1)             |
//! | 12     | 4    | n (u32)                                |
//! | 16     | 8    | h (f64)                                |
//! | 24     | 8    | k (u64)                                |
//! | 32     | 8    | t (f64)                                |
//! | 40     | 32   | SHA-256 of the payload bytes           |
//! | 72     | 8 n^3| u as f64, index i + n (j + n k)       |
//!
//! i is the x index, so x varies fastest (row-major over [k][j][i]).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const MAGIC: &[u8; 8] = b"LANDSNAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 72;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub h: f64,
    pub k: u64,
    pub t: f64,
    pub values: Vec<f64>,
}

/// Sidecar JSON written next to each snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub config_hash: String,
    pub k: u64,
    pub t: f64,
    pub n: usize,
    pub h: f64,
}

pub fn encode(u: &ScalarField, k: u64, t: f64) -> Vec<u8> {
    let g = u.grid();
    let mut payload = Vec::with_capacity(8 * g.len());
    for v in u.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.h().to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Snapshot> {
    let corrupt = |reason: String| Error::CorruptSnapshot { path: path.to_path_buf(), reason };
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!("file has {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[0..8] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let n = u32_at(12) as usize;
    let h = f64::from_bits(u64_at(16));
    let k = u64_at(24);
    let t = f64::from_bits(u64_at(32));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * n * n * n {
        return Err(corrupt(format!("payload has {} bytes, expected {}", payload.len(), 8 * n * n * n)));
    }
    if Sha256::digest(payload).as_slice() != &bytes[40..72] {
        return Err(corrupt("checksum mismatch".into()));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Snapshot { n, h, k, t, values })
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn snapshot_path(dir: &Path, k: u64) -> PathBuf {
    dir.join(format!("u_{k:06}.bin"))
}

pub fn meta_path(dir: &Path, k: u64) -> PathBuf {
    dir.join(format!("u_{k:06}.meta.json"))
}

pub fn write_snapshot(path: &Path, u: &ScalarField, k: u64, t: f64) -> Result<()> {
    write_atomic(path, &encode(u, k, t))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
