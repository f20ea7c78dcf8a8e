//! Spinodoid phase fields: spectral synthesis from the cone angles,
//! solidification into a shell, isosurface extraction and geometric
//! descriptors.
//!
//! Grid layout is row-major with axis 0 slowest: value `(i0, i1, i2)` sits at
//! `(i0 * K + i1) * K + i2`, and axis `j` is the `e_{j+1}` direction. Filter
//! fields use the same layout over wave-vector indices, index `i` standing
//! for integer frequency `i` when `i <= K / 2` and `i - K` otherwise.

mod dft;
mod mesh;

pub use dft::{fft3, Dft, NaiveDft};
pub use mesh::{extract_isosurface, npf_average, pole_figure, shell_surface, Boundary, PoleFigure, SurfaceMesh};

use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DesignParams;
use crate::math;
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("resolution must be at least {min}, got {got}")]
    Resolution { min: usize, got: usize },
    #[error("domain size must be positive and finite, got {0}")]
    DomainSize(f64),
    #[error("invalid spectral parameter {name} = {value}")]
    SpectralParam { name: &'static str, value: f64 },
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("expected a {expected:?} field, got {got:?}")]
    WrongKind { expected: FieldKind, got: FieldKind },
    #[error("degenerate filter: the filtered field is constant")]
    DegenerateFilter,
    #[error("shell thickness {h} must lie in (0, {limit})")]
    Thickness { h: f64, limit: f64 },
    #[error("field has no gradient")]
    FlatField,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("loading direction must be a unit vector")]
    Direction,
    #[error("histogram needs at least one bin per axis")]
    Bins,
    #[error("field length {got} does not match K^3 = {expected}")]
    Length { expected: usize, got: usize },
    #[error("field contains non-finite values")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, FieldError>;

/// Smallest grid resolution accepted by the synthesis operations.
pub const MIN_RESOLUTION: usize = 8;
/// Default non-dimensional wavenumber `beta * l`.
pub const DEFAULT_BETA_STAR: f64 = 5.0;
pub const DEFAULT_LAMBDA_R: f64 = 0.3;
/// Per degree.
pub const DEFAULT_LAMBDA_PHI: f64 = 0.175;
pub const DEFAULT_RESOLUTION: usize = 100;
pub const DEFAULT_DOMAIN_SIZE: f64 = 100.0;
pub const DEFAULT_THICKNESS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Noise,
    FilterSdf,
    Phase,
    Occupancy,
}

impl FieldKind {
    pub fn code(self) -> u32 {
        match self {
            Self::Noise => 0,
            Self::FilterSdf => 1,
            Self::Phase => 2,
            Self::Occupancy => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        [Self::Noise, Self::FilterSdf, Self::Phase, Self::Occupancy].into_iter().find(|k| k.code() == code)
    }
}

/// Scalar field on a periodic `K^3` grid over a cube of side `domain_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    resolution: usize,
    domain_size: f64,
    kind: FieldKind,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(resolution: usize, domain_size: f64, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if resolution == 0 {
            return Err(FieldError::Resolution { min: 1, got: 0 });
        }
        if !(domain_size > 0.0 && domain_size.is_finite()) {
            return Err(FieldError::DomainSize(domain_size));
        }
        let expected = resolution * resolution * resolution;
        if values.len() != expected {
            return Err(FieldError::Length { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { resolution, domain_size, kind, values })
    }

    /// Field sampled from `f(i0, i1, i2)`.
    pub fn from_fn(
        resolution: usize,
        domain_size: f64,
        kind: FieldKind,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(resolution * resolution * resolution);
        for i in 0..resolution {
            for j in 0..resolution {
                for k in 0..resolution {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::new(resolution, domain_size, kind, values)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn domain_size(&self) -> f64 {
        self.domain_size
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Value at any integer index, wrapped periodically.
    pub fn get_wrapped(&self, i: isize, j: isize, k: isize) -> f64 {
        let n = self.resolution as isize;
        self.get(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize, k.rem_euclid(n) as usize)
    }

    pub fn spacing(&self) -> f64 {
        self.domain_size / self.resolution as f64
    }

    fn expect_kind(&self, expected: FieldKind) -> Result<()> {
        if self.kind != expected {
            return Err(FieldError::WrongKind { expected, got: self.kind });
        }
        Ok(())
    }
}

/// Parameters of the spectral density function.
///
/// `beta` is a wavenumber in cycles per unit length. `lambda_r` is measured
/// in units of `1 / l` (the grid's frequency spacing) and `lambda_phi` is per
/// degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    pub beta: f64,
    pub lambda_r: f64,
    pub lambda_phi: f64,
    pub theta: DesignParams,
}

impl SpectralParams {
    /// Default parameters for a cube of side `domain_size`: `beta = 5 / l`.
    pub fn with_defaults(theta: DesignParams, domain_size: f64) -> Self {
        Self { beta: DEFAULT_BETA_STAR / domain_size, lambda_r: DEFAULT_LAMBDA_R, lambda_phi: DEFAULT_LAMBDA_PHI, theta }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("beta", self.beta), ("lambda_r", self.lambda_r), ("lambda_phi", self.lambda_phi)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(FieldError::SpectralParam { name, value });
            }
        }
        Ok(())
    }
}

fn check_grid(resolution: usize, domain_size: f64) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(FieldError::Resolution { min: MIN_RESOLUTION, got: resolution });
    }
    if !(domain_size > 0.0 && domain_size.is_finite()) {
        return Err(FieldError::DomainSize(domain_size));
    }
    Ok(())
}

/// Signed integer frequency of DFT index `i` on a grid of `n` points.
pub fn frequency(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Angle in degrees between `k` and the line through axis `axis`.
pub fn axis_angle(k: [f64; 3], axis: usize) -> f64 {
    let r = math::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
    math::degrees(math::acos((k[axis].abs() / r).min(1.0)))
}

/// Radial (wavenumber) factor of the SDF at wavenumber `r`.
pub fn radial_factor(params: &SpectralParams, r: f64, domain_size: f64) -> f64 {
    let d = (r - params.beta) * domain_size / params.lambda_r;
    math::exp(-0.5 * d * d)
}

/// Angular (anisotropy) factor of the SDF at a non-zero wave-vector.
pub fn angular_factor(params: &SpectralParams, k: [f64; 3]) -> f64 {
    let theta = params.theta.angles();
    (0..3).map(|i| math::half_tanh_step(-params.lambda_phi * (axis_angle(k, i) - theta[i]))).sum()
}

/// SDF at wave-vector `k` (cycles per unit length); zero at `k = 0`.
pub fn sdf_value(params: &SpectralParams, k: [f64; 3], domain_size: f64) -> f64 {
    let r = math::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
    if r == 0.0 {
        return 0.0;
    }
    radial_factor(params, r, domain_size) * angular_factor(params, k)
}

/// SDF on the discrete wave-vectors `n / l` of a `K^3` grid.
pub fn build_filter_sdf(params: &SpectralParams, resolution: usize, domain_size: f64) -> Result<GridField> {
    check_grid(resolution, domain_size)?;
    params.validate()?;
    let freq: Vec<f64> = (0..resolution).map(|i| frequency(i, resolution) / domain_size).collect();
    GridField::from_fn(resolution, domain_size, FieldKind::FilterSdf, |i, j, k| {
        sdf_value(params, [freq[i], freq[j], freq[k]], domain_size)
    })
}

/// `K^3` independent standard normal samples.
pub fn sample_noise(resolution: usize, domain_size: f64, seed: u64) -> Result<GridField> {
    check_grid(resolution, domain_size)?;
    let mut rng = Rng::new(seed, stream::NOISE);
    let n = resolution * resolution * resolution;
    GridField::new(resolution, domain_size, FieldKind::Noise, (0..n).map(|_| rng.normal()).collect())
}

/// Filter the noise by the square root of the SDF in Fourier space and
/// standardize the result to zero mean and unit variance.
pub fn synthesize_phase_field(noise: &GridField, sdf: &GridField, dft: &dyn Dft) -> Result<GridField> {
    noise.expect_kind(FieldKind::Noise)?;
    sdf.expect_kind(FieldKind::FilterSdf)?;
    if noise.resolution != sdf.resolution {
        return Err(FieldError::ResolutionMismatch(noise.resolution, sdf.resolution));
    }
    let n = noise.resolution;
    let mut data: Vec<Complex64> = noise.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(dft, &mut data, n, false);
    for (z, &s) in data.iter_mut().zip(&sdf.values) {
        *z *= math::sqrt(s.max(0.0));
    }
    fft3(dft, &mut data, n, true);
    let scale = 1.0 / data.len() as f64;
    let values: Vec<f64> = data.iter().map(|z| z.re * scale).collect();
    let values = standardize(values).ok_or(FieldError::DegenerateFilter)?;
    GridField::new(n, noise.domain_size, FieldKind::Phase, values)
}

/// Zero mean, unit (population) variance; `None` for a constant input.
pub fn standardize(mut values: Vec<f64>) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0 && var.is_finite()) {
        return None;
    }
    let inv = 1.0 / math::sqrt(var);
    for v in &mut values {
        *v = (*v - mean) * inv;
    }
    Some(values)
}

/// Noise, filter and standardized phase field in one call.
pub fn generate_phase_field(
    params: &SpectralParams,
    resolution: usize,
    domain_size: f64,
    seed: u64,
    dft: &dyn Dft,
) -> Result<GridField> {
    let sdf = build_filter_sdf(params, resolution, domain_size)?;
    let noise = sample_noise(resolution, domain_size, seed)?;
    synthesize_phase_field(&noise, &sdf, dft)
}

/// Grid-average of `|grad phi|` by wrap-around central differences.
pub fn mean_gradient_norm(phase: &GridField) -> f64 {
    let n = phase.resolution as isize;
    let inv = 1.0 / (2.0 * phase.spacing());
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let g0 = phase.get_wrapped(i + 1, j, k) - phase.get_wrapped(i - 1, j, k);
                let g1 = phase.get_wrapped(i, j + 1, k) - phase.get_wrapped(i, j - 1, k);
                let g2 = phase.get_wrapped(i, j, k + 1) - phase.get_wrapped(i, j, k - 1);
                sum += math::sqrt(g0 * g0 + g1 * g1 + g2 * g2) * inv;
            }
        }
    }
    sum / phase.values.len() as f64
}

/// Occupancy of a thickened level set.
#[derive(Debug, Clone, PartialEq)]
pub struct Solid {
    pub occupancy: GridField,
    /// Band half-width in field units.
    pub tau: f64,
    pub relative_density: f64,
}

/// Voxel shell of thickness `h` around the zero level set: a point is solid
/// where `|phi| <= tau`, with `tau = h * E|grad phi| / 2` so the band is `h`
/// wide on average.
pub fn solidify(phase: &GridField, h: f64) -> Result<Solid> {
    let limit = phase.domain_size / 4.0;
    if !(h > 0.0 && h < limit) {
        return Err(FieldError::Thickness { h, limit });
    }
    let g = mean_gradient_norm(phase);
    if !(g > 0.0) {
        return Err(FieldError::FlatField);
    }
    let tau = h * g / 2.0;
    let values = phase.values.iter().map(|v| if v.abs() <= tau { 1.0 } else { 0.0 }).collect();
    let occupancy = GridField::new(phase.resolution, phase.domain_size, FieldKind::Occupancy, values)?;
    let relative_density = relative_density(&occupancy);
    Ok(Solid { occupancy, tau, relative_density })
}

/// Mean of the occupancy values.
pub fn relative_density(occ: &GridField) -> f64 {
    occ.values.iter().sum::<f64>() / occ.values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellRegime {
    Thick,
    Thin,
}

/// Thick iff `beta_star * h / l > 0.1`.
pub fn shell_regime_check(beta_star: f64, h: f64, domain_size: f64) -> ShellRegime {
    if beta_star * h / domain_size > 0.1 {
        ShellRegime::Thick
    } else {
        ShellRegime::Thin
    }
}
