//! On-disk artifacts.
//!
//! Text numbers are written in scientific notation with 17 significant
//! digits, which reproduces every `f64` exactly on reading.

pub mod csv;
pub mod field;
pub mod manifest;
pub mod model;
pub mod stl;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{read_string, write_bytes, Error, Result};

/// Version tag of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Decimal form with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::internal)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Reads a JSON document whose top-level `schema_version` must equal
/// `expected`. The version is checked before the rest of the document.
pub fn read_versioned_json<T: DeserializeOwned>(path: &Path, expected: u32) -> Result<T> {
    let text = read_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::format(path, "missing schema_version"))?;
    if found != u64::from(expected) {
        return Err(Error::Schema { path: path.to_path_buf(), found, expected });
    }
    serde_json::from_value(value).map_err(|e| Error::format(path, e))
}
