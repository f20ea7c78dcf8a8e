//! Network checkpoints.
//!
//! A registry directory holds one JSON model file per (direction, class)
//! energy model under `models/` and a `registry.json` manifest that lists
//! them together with the normalization scales. Every document carries
//! `schema_version`; a mismatch is reported before anything else is parsed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinodal_core::dataset::teacher::Teacher;
use spinodal_core::dataset::{Direction, MorphologyClass, NormalizationConfig};
use spinodal_core::picnn::{EnergyModel, OffsetNetWeights, PicnnPair, PicnnWeights, Submodule};
use spinodal_core::train::{ModelRegistry, REGISTRY_SCHEMA_VERSION};

use super::{read_versioned_json, write_json};
use crate::error::{Error, Result};

pub const REGISTRY_FILE: &str = "registry.json";
pub const MODEL_DIR: &str = "models";

/// One energy model: both PICNNs of a class plus the direction's offset nets.
/// Matrices are stored as `{rows, cols, data}` with row-major `data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub direction: Direction,
    pub class: MorphologyClass,
    pub k_t: f64,
    /// Hidden widths of both PICNNs.
    pub dims: Vec<usize>,
    /// Squared-softplus scale of each PICNN layer.
    pub alpha: Vec<f64>,
    pub picnn1: PicnnWeights,
    pub picnn2: PicnnWeights,
    pub bnet: OffsetNetWeights,
    pub vnet: OffsetNetWeights,
}

impl ModelFile {
    pub fn new(m: &EnergyModel) -> Self {
        Self {
            schema_version: REGISTRY_SCHEMA_VERSION,
            direction: m.direction,
            class: m.class,
            k_t: m.k_t,
            dims: m.picnn1.hidden.clone(),
            alpha: m.picnn1.layers.iter().map(|l| l.alpha).collect(),
            picnn1: m.picnn1.clone(),
            picnn2: m.picnn2.clone(),
            bnet: m.bnet.clone(),
            vnet: m.vnet.clone(),
        }
    }

    pub fn into_model(self, path: &Path) -> Result<EnergyModel> {
        for (name, p) in [("picnn1", &self.picnn1), ("picnn2", &self.picnn2)] {
            if p.hidden != self.dims {
                return Err(Error::format(path, format!("{name} widths {:?} differ from dims {:?}", p.hidden, self.dims)));
            }
            let alpha: Vec<f64> = p.layers.iter().map(|l| l.alpha).collect();
            if alpha != self.alpha {
                return Err(Error::format(path, format!("{name} layer scales differ from alpha")));
            }
        }
        let model = EnergyModel {
            direction: self.direction,
            class: self.class,
            k_t: self.k_t,
            picnn1: self.picnn1,
            picnn2: self.picnn2,
            bnet: self.bnet,
            vnet: self.vnet,
        };
        model.validate().map_err(|e| Error::format(path, e))?;
        Ok(model)
    }
}

pub fn model_file_name(direction: Direction, class: MorphologyClass) -> String {
    format!("e{}_{}.json", direction.number(), class.name())
}

pub fn save_model(path: &Path, model: &EnergyModel) -> Result<()> {
    write_json(path, &ModelFile::new(model))
}

pub fn load_model(path: &Path) -> Result<EnergyModel> {
    read_versioned_json::<ModelFile>(path, REGISTRY_SCHEMA_VERSION)?.into_model(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub direction: Direction,
    pub class: MorphologyClass,
    /// Relative to the manifest's directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryManifest {
    pub schema_version: u32,
    pub norm: NormalizationConfig,
    pub models: Vec<ModelEntry>,
}

/// Writes the model files and manifest into `dir`; returns the manifest path.
pub fn save_registry(dir: &Path, registry: &ModelRegistry) -> Result<PathBuf> {
    let mut models = Vec::new();
    for sub in &registry.submodules {
        for class in MorphologyClass::ALL {
            let file = format!("{MODEL_DIR}/{}", model_file_name(sub.direction, class));
            save_model(&dir.join(&file), &sub.energy_model(class))?;
            models.push(ModelEntry { direction: sub.direction, class, file });
        }
    }
    let manifest = RegistryManifest { schema_version: REGISTRY_SCHEMA_VERSION, norm: registry.norm, models };
    let path = dir.join(REGISTRY_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Accepts the manifest path or the directory containing it.
pub fn load_registry(path: &Path) -> Result<ModelRegistry> {
    let path = if path.is_dir() { path.join(REGISTRY_FILE) } else { path.to_path_buf() };
    let manifest: RegistryManifest = read_versioned_json(&path, REGISTRY_SCHEMA_VERSION)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut slots: Vec<Vec<Option<EnergyModel>>> = vec![vec![None; 3]; 3];
    for e in &manifest.models {
        let file = base.join(&e.file);
        let m = load_model(&file)?;
        if (m.direction, m.class) != (e.direction, e.class) {
            return Err(Error::format(&file, "direction or class differs from the registry entry"));
        }
        slots[e.direction.index()][e.class.index()] = Some(m);
    }
    let mut submodules = Vec::with_capacity(3);
    for d in Direction::ALL {
        let models: Vec<EnergyModel> = slots[d.index()]
            .iter()
            .zip(MorphologyClass::ALL)
            .map(|(m, c)| m.clone().ok_or_else(|| Error::format(&path, format!("no model for e{} {}", d.number(), c.name()))))
            .collect::<Result<_>>()?;
        let first = &models[0];
        if models.iter().any(|m| m.k_t != first.k_t || m.bnet != first.bnet || m.vnet != first.vnet) {
            return Err(Error::format(&path, format!("offset nets or k_T differ between classes of e{}", d.number())));
        }
        submodules.push(Submodule {
            direction: d,
            k_t: first.k_t,
            bnet: first.bnet.clone(),
            vnet: first.vnet.clone(),
            pairs: models.into_iter().map(|m| PicnnPair { picnn1: m.picnn1, picnn2: m.picnn2 }).collect(),
        });
    }
    ModelRegistry::new(submodules, manifest.norm).map_err(|e| Error::format(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherFile {
    pub schema_version: u32,
    pub seed: u64,
    pub teacher: Teacher,
}

pub fn save_teacher(path: &Path, teacher: &Teacher, seed: u64) -> Result<()> {
    write_json(path, &TeacherFile { schema_version: REGISTRY_SCHEMA_VERSION, seed, teacher: teacher.clone() })
}

pub fn load_teacher(path: &Path) -> Result<Teacher> {
    Ok(read_versioned_json::<TeacherFile>(path, REGISTRY_SCHEMA_VERSION)?.teacher)
}
