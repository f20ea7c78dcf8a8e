//! Binary grid-field container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | content                |
//! |--------|------|------------------------|
//! | 0      | 4    | magic `SPNF`           |
//! | 4      | 4    | version `u32`          |
//! | 8      | 4    | resolution `K`, `u32`  |
//! | 12     | 4    | field kind code, `u32` |
//! | 16     | 8    | domain size, `f64`     |
//! | 24     | 24   | reserved, zero         |
//! | 48     | 8 K³ | values, `f64`, row-major `(i, j, k)` |

use std::path::Path;

use serde::{Deserialize, Serialize};
use spinodal_core::field::{FieldKind, GridField, SpectralParams};

use super::SCHEMA_VERSION;
use crate::error::{read_bytes, write_bytes, Error, Result};

pub const MAGIC: [u8; 4] = *b"SPNF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;

pub fn encode(field: &GridField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.values().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(field.resolution() as u32).to_le_bytes());
    out.extend_from_slice(&field.kind().code().to_le_bytes());
    out.extend_from_slice(&field.domain_size().to_le_bytes());
    out.resize(HEADER_LEN, 0);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<GridField> {
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a field file"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Schema { path: path.to_path_buf(), found: version.into(), expected: VERSION });
    }
    let k = u32_at(bytes, 8) as usize;
    let kind = FieldKind::from_code(u32_at(bytes, 12))
        .ok_or_else(|| Error::format(path, format!("unknown field kind {}", u32_at(bytes, 12))))?;
    let domain_size = f64_at(bytes, 16);
    let n = k.checked_pow(3).ok_or_else(|| Error::format(path, "resolution overflows"))?;
    if bytes.len() != HEADER_LEN + 8 * n {
        return Err(Error::format(path, format!("expected {} value bytes, found {}", 8 * n, bytes.len() - HEADER_LEN)));
    }
    let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    GridField::new(k, domain_size, kind, values).map_err(|e| Error::format(path, e))
}

pub fn write(path: &Path, field: &GridField) -> Result<()> {
    write_bytes(path, &encode(field))
}

pub fn read(path: &Path) -> Result<GridField> {
    decode(&read_bytes(path)?, path)
}

/// JSON written next to a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: u32,
    pub kind: FieldKind,
    pub resolution: usize,
    pub domain_size: f64,
    pub seed: u64,
    pub params: SpectralParams,
}

impl Sidecar {
    pub fn new(field: &GridField, params: SpectralParams, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: field.kind(),
            resolution: field.resolution(),
            domain_size: field.domain_size(),
            seed,
            params,
        }
    }
}
