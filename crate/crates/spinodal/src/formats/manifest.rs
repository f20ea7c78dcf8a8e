//! Dataset directory: one curve CSV per sample plus `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinodal_core::dataset::{DesignParams, Direction, Sample};

use super::csv::CurveFile;
use super::{read_versioned_json, write_json, SCHEMA_VERSION};
use crate::error::{read_string, write_bytes, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLE_DIR: &str = "samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub file: String,
    pub split: Split,
    pub theta: DesignParams,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub e_s: f64,
    pub seed: u64,
    pub test_fraction: f64,
    pub samples: Vec<ManifestEntry>,
}

/// Samples with their split assignment, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub splits: Vec<Split>,
    pub files: Vec<String>,
    pub e_s: f64,
}

impl Dataset {
    pub fn subset(&self, split: Option<Split>) -> Vec<Sample> {
        self.samples
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| split.is_none_or(|want| **s == want))
            .map(|(x, _)| x.clone())
            .collect()
    }

    /// File stems of [`Self::subset`].
    pub fn subset_files(&self, split: Option<Split>) -> Vec<String> {
        self.files
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| split.is_none_or(|want| **s == want))
            .map(|(f, _)| f.clone())
            .collect()
    }
}

pub fn sample_file_name(index: usize, s: &Sample) -> String {
    format!("{SAMPLE_DIR}/s{index:05}_e{}.csv", s.direction.number())
}

/// Writes every sample and the manifest into `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, samples: &[Sample], test: &[usize], e_s: f64, seed: u64, test_fraction: f64) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let file = sample_file_name(i, s);
        write_bytes(&dir.join(&file), CurveFile::from_sample(s, e_s).encode().as_bytes())?;
        let split = if test.contains(&i) { Split::Test } else { Split::Train };
        entries.push(ManifestEntry { file, split, theta: s.theta, direction: s.direction });
    }
    let manifest = DatasetManifest { schema_version: SCHEMA_VERSION, e_s, seed, test_fraction, samples: entries };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Accepts the manifest path or the directory containing it.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let manifest: DatasetManifest = read_versioned_json(&path, SCHEMA_VERSION)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Dataset { samples: Vec::new(), splits: Vec::new(), files: Vec::new(), e_s: manifest.e_s };
    for e in manifest.samples {
        let file = base.join(&e.file);
        let cf = CurveFile::decode(&read_string(&file)?).map_err(|m| Error::format(&file, m))?;
        let sample = cf.to_sample().ok_or_else(|| Error::format(&file, "sample file needs theta and direction"))?;
        if sample.theta != e.theta || sample.direction != e.direction {
            return Err(Error::format(&file, "theta or direction differs from the manifest entry"));
        }
        out.samples.push(sample);
        out.splits.push(e.split);
        out.files.push(e.file);
    }
    Ok(out)
}
