//! Command implementations. Each writes its artifacts into an output
//! directory together with the resolved configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use spinodal_core::dataset::teacher::{synthesize_teacher_dataset, TeacherConfig};
use spinodal_core::dataset::{split_by_design, DesignParams, Direction, StrainGrid};
use spinodal_core::design::{optimize_with, scale_target, DesignResult};
use spinodal_core::field::{
    generate_phase_field, npf_average, pole_figure, shell_regime_check, shell_surface, solidify, GridField, PoleFigure,
    ShellRegime, SpectralParams, SurfaceMesh,
};
use spinodal_core::train::{evaluate_metrics, predict_test_set, train_registry, Metrics, ModelRegistry, TrainError};

use crate::backend::{RayonRunner, RustFft};
use crate::config::{FieldConfig, RunConfig};
use crate::error::{read_string, write_bytes, Error, Result};
use crate::formats::csv::{self, CurveFile, LogRow};
use crate::formats::manifest::{read_dataset, write_dataset, Split};
use crate::formats::model::{load_registry, save_registry, save_teacher};
use crate::formats::{field, stl, write_json, SCHEMA_VERSION};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_bytes(&dir.join(RESOLVED_CONFIG), cfg.to_toml().as_bytes())
}

/// Everything derived from one design.
#[derive(Debug, Clone)]
pub struct Generated {
    pub params: SpectralParams,
    pub seed: u64,
    pub phase: GridField,
    pub tau: f64,
    pub relative_density: f64,
    pub mesh: SurfaceMesh,
    pub npf: [f64; 3],
    pub pole: PoleFigure,
    pub regime: ShellRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NpfTriple {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateMetrics {
    pub schema_version: u32,
    pub theta: DesignParams,
    pub class: &'static str,
    pub seed: u64,
    pub resolution: usize,
    pub domain_size: f64,
    pub thickness: f64,
    pub tau: f64,
    pub relative_density: f64,
    pub npf: NpfTriple,
    pub shell_regime: ShellRegime,
    pub thick_shell: bool,
    pub triangles: usize,
    pub surface_area: f64,
}

pub fn spectral_params(theta: DesignParams, f: &FieldConfig) -> SpectralParams {
    SpectralParams {
        beta: f.beta_star / f.domain_size,
        lambda_r: f.lambda_r,
        lambda_phi: f.lambda_phi,
        theta,
    }
}

/// Phase field only.
pub fn phase_field(theta: DesignParams, f: &FieldConfig, seed: u64) -> Result<GridField> {
    generate_phase_field(&spectral_params(theta, f), f.resolution, f.domain_size, seed, &RustFft).map_err(Error::usage)
}

pub fn generate(theta: DesignParams, f: &FieldConfig, seed: u64) -> Result<Generated> {
    let params = spectral_params(theta, f);
    let phase = generate_phase_field(&params, f.resolution, f.domain_size, seed, &RustFft).map_err(Error::usage)?;
    let solid = solidify(&phase, f.thickness).map_err(Error::usage)?;
    let mesh = shell_surface(&phase, solid.tau);
    let mut npf = [0.0; 3];
    for d in Direction::ALL {
        npf[d.index()] = npf_average(&mesh, d.unit_vector()).map_err(Error::internal)?;
    }
    let pole = pole_figure(&mesh, f.azimuth_bins, f.polar_bins).map_err(Error::internal)?;
    Ok(Generated {
        params,
        seed,
        phase,
        tau: solid.tau,
        relative_density: solid.relative_density,
        mesh,
        npf,
        pole,
        regime: shell_regime_check(f.beta_star, f.thickness, f.domain_size),
    })
}

/// Independent designs generated in parallel, in input order.
pub fn generate_batch(thetas: &[DesignParams], f: &FieldConfig, seed: u64) -> Vec<Result<Generated>> {
    thetas.par_iter().map(|t| generate(*t, f, seed)).collect()
}

impl Generated {
    pub fn metrics(&self, f: &FieldConfig) -> Result<GenerateMetrics> {
        let theta = self.params.theta;
        Ok(GenerateMetrics {
            schema_version: SCHEMA_VERSION,
            theta,
            class: theta.class().map_err(Error::usage)?.name(),
            seed: self.seed,
            resolution: self.phase.resolution(),
            domain_size: self.phase.domain_size(),
            thickness: f.thickness,
            tau: self.tau,
            relative_density: self.relative_density,
            npf: NpfTriple { e1: self.npf[0], e2: self.npf[1], e3: self.npf[2] },
            shell_regime: self.regime,
            thick_shell: self.regime == ShellRegime::Thick,
            triangles: self.mesh.len(),
            surface_area: self.mesh.total_area(),
        })
    }

    /// `field.spnf`, `field.json`, `shell.stl`, `metrics.json`,
    /// `pole_figure.csv` and `npf.csv`.
    pub fn write(&self, dir: &Path, f: &FieldConfig) -> Result<()> {
        field::write(&dir.join("field.spnf"), &self.phase)?;
        write_json(&dir.join("field.json"), &field::Sidecar::new(&self.phase, self.params, self.seed))?;
        write_bytes(&dir.join("shell.stl"), &stl::encode(&self.mesh))?;
        write_json(&dir.join("metrics.json"), &self.metrics(f)?)?;
        write_bytes(&dir.join("pole_figure.csv"), csv::pole_figure(&self.pole).as_bytes())?;
        write_bytes(&dir.join("npf.csv"), csv::npf(&self.npf).as_bytes())
    }
}

/// One design writes into `out`; several write into `out/theta_<i>`.
pub fn cmd_generate(cfg: &RunConfig, thetas: &[DesignParams], out: &Path) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::usage("at least one --theta is required"));
    }
    let results = generate_batch(thetas, &cfg.field, cfg.seed);
    for (i, r) in results.into_iter().enumerate() {
        let dir = if thetas.len() == 1 { out.to_path_buf() } else { out.join(format!("theta_{i}")) };
        r?.write(&dir, &cfg.field)?;
    }
    write_config(out, cfg)
}

/// Teacher dataset, teacher checkpoint and split manifest.
pub fn cmd_make_dataset(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let d = &cfg.dataset;
    let tc = TeacherConfig { seed: cfg.seed, n_per_class: d.n_per_class, noise: d.noise, grid: StrainGrid::default() };
    let (samples, teacher) = synthesize_teacher_dataset(&tc).map_err(Error::usage)?;
    let (_, test) = split_by_design(&samples, cfg.seed, d.test_fraction);
    let manifest = write_dataset(out, &samples, &test, d.e_s, cfg.seed, d.test_fraction)?;
    save_teacher(&out.join("teacher.json"), &teacher, cfg.seed)?;
    write_config(out, cfg)?;
    Ok(manifest)
}

fn train_error(e: TrainError) -> Error {
    match e {
        TrainError::NonFinite(_) | TrainError::ShapeMismatch | TrainError::Picnn(_) => Error::internal(e),
        _ => Error::Usage(format!("training data: {e}")),
    }
}

/// Trains on the manifest's train split; writes the registry and
/// `train_log.csv`.
pub fn cmd_train(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<ModelRegistry> {
    let data = read_dataset(manifest)?;
    let train = data.subset(Some(Split::Train));
    if train.is_empty() {
        return Err(Error::format(manifest, "no training samples"));
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    let (registry, _) = train_registry(&train, &cfg.train, cfg.transfer, |direction, log| {
        rows.push(LogRow { direction, log: *log, wall_ms: start.elapsed().as_millis() });
    })
    .map_err(train_error)?;
    save_registry(out, &registry)?;
    write_bytes(&out.join("train_log.csv"), csv::train_log(&rows).as_bytes())?;
    write_config(out, cfg)?;
    Ok(registry)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub split: &'static str,
    #[serde(flatten)]
    pub metrics: Metrics,
}

fn split_name(split: Option<Split>) -> &'static str {
    match split {
        Some(Split::Train) => "train",
        Some(Split::Test) => "test",
        None => "all",
    }
}

/// Metrics JSON plus one predicted-curve CSV per evaluated sample under
/// `curves/`.
pub fn cmd_eval(registry: &Path, manifest: &Path, split: Option<Split>, out: &Path) -> Result<Metrics> {
    let registry = load_registry(registry)?;
    let data = read_dataset(manifest)?;
    let samples = data.subset(split);
    let files = data.subset_files(split);
    if samples.is_empty() {
        return Err(Error::format(manifest, format!("no samples in split {}", split_name(split))));
    }
    let metrics = evaluate_metrics(&registry, &samples).map_err(|e| Error::format(manifest, e))?;
    let (on_grid, preds) = predict_test_set(&registry, &samples).map_err(|e| Error::format(manifest, e))?;
    for ((s, p), file) in on_grid.iter().zip(preds).zip(&files) {
        let name = Path::new(file).file_name().map(|n| n.to_os_string()).unwrap_or_else(|| file.into());
        let curve = spinodal_core::dataset::Curve::new(s.curve.strain().to_vec(), p).map_err(Error::internal)?;
        let cf = CurveFile { theta: Some(s.theta), direction: Some(s.direction), e_s: data.e_s, provenance: None, curve };
        write_bytes(&out.join("curves").join(name), cf.encode().as_bytes())?;
    }
    let report = EvalReport { schema_version: SCHEMA_VERSION, split: split_name(split), metrics: metrics.clone() };
    write_json(&out.join("metrics.json"), &report)?;
    Ok(metrics)
}

/// Predicted curve on the registry's strain grid.
pub fn predict_curve(registry: &ModelRegistry, theta: DesignParams, direction: Direction) -> Result<CurveFile> {
    let curve = registry.predict(&theta, direction, &registry.norm.grid.points()).map_err(Error::internal)?;
    Ok(CurveFile { theta: Some(theta), direction: Some(direction), e_s: registry.norm.e_s, provenance: None, curve })
}

pub fn cmd_predict(registry: &Path, theta: DesignParams, direction: Direction) -> Result<String> {
    Ok(predict_curve(&load_registry(registry)?, theta, direction)?.encode())
}

/// `result.json` with the design result and `curve.csv` with the predicted
/// curve of the winning design.
pub fn cmd_design(cfg: &RunConfig, registry: &Path, target: &Path, out: &Path) -> Result<DesignResult> {
    let registry = load_registry(registry)?;
    let tf = CurveFile::decode(&read_string(target)?).map_err(|m| Error::format(target, m))?;
    let t = scale_target(&tf.curve, cfg.design.kappa).map_err(Error::usage)?;
    let result = optimize_with(&t, &registry, &cfg.design, &RayonRunner).map_err(|e| Error::format(target, e))?;
    write_json(&out.join("result.json"), &result)?;
    let best = predict_curve(&registry, result.theta_star, result.direction_star)?;
    write_bytes(&out.join("curve.csv"), best.encode().as_bytes())?;
    write_config(out, cfg)?;
    Ok(result)
}
