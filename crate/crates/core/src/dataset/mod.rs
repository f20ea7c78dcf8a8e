//! Designs, curves and the preprocessing that turns raw compression data into
//! training samples.

mod curve;
mod symmetry;
pub mod teacher;

pub use curve::{absorbed_energy, incremental_stiffness, interpolate_curve};
pub use symmetry::{canonical_direction, canonical_equivalents, expand_permutations};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;

/// Lower bound for a non-zero cone angle, degrees.
pub const THETA_MIN: f64 = 20.0;
/// Upper bound for a cone angle, degrees.
pub const THETA_MAX: f64 = 70.0;
/// Constituent (IP-Dip) Young's modulus in Pa.
pub const DEFAULT_E_S: f64 = 3.2e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("angle {0} deg is neither 0 nor within [{THETA_MIN}, {THETA_MAX}]")]
    InvalidAngle(f64),
    #[error("degenerate design: all three angles are zero")]
    DegenerateDesign,
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
    #[error("insufficient strain range: curve ends at {0}, grid needs {1}")]
    InsufficientStrainRange(f64, f64),
    #[error("normalization maximum must be positive")]
    ZeroMaximum,
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("direction must be 1, 2 or 3, got {0}")]
    InvalidDirection(u32),
    #[error("empty dataset")]
    Empty,
}

pub type Result<T> = core::result::Result<T, DatasetError>;

/// Cone half-angles `[theta1, theta2, theta3]` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct DesignParams {
    theta: [f64; 3],
}

impl TryFrom<[f64; 3]> for DesignParams {
    type Error = DatasetError;

    fn try_from(theta: [f64; 3]) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<DesignParams> for [f64; 3] {
    fn from(p: DesignParams) -> Self {
        p.theta
    }
}

impl DesignParams {
    /// Each angle must be exactly 0 or lie in `[THETA_MIN, THETA_MAX]`.
    pub fn new(theta: [f64; 3]) -> Result<Self> {
        for &a in &theta {
            let ok = a == 0.0 || (THETA_MIN..=THETA_MAX).contains(&a);
            if !ok {
                return Err(DatasetError::InvalidAngle(a));
            }
        }
        Ok(Self { theta })
    }

    pub fn angles(&self) -> [f64; 3] {
        self.theta
    }

    /// Ascending order.
    pub fn canonical(&self) -> Self {
        let mut t = self.theta;
        sort3(&mut t);
        Self { theta: t }
    }

    pub fn is_canonical(&self) -> bool {
        self.theta[0] <= self.theta[1] && self.theta[1] <= self.theta[2]
    }

    pub fn class(&self) -> Result<MorphologyClass> {
        classify_morphology(self)
    }

    /// Angles divided by `theta_max`.
    pub fn normalized(&self, theta_max: f64) -> [f64; 3] {
        self.theta.map(|a| a / theta_max)
    }
}

pub(crate) fn sort3(t: &mut [f64; 3]) {
    // stable insertion sort; ties keep their index order
    for i in 1..3 {
        let mut j = i;
        while j > 0 && t[j - 1] > t[j] {
            t.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Two zeros: lamellar, one zero: columnar, none: cubic.
pub fn classify_morphology(p: &DesignParams) -> Result<MorphologyClass> {
    match p.theta.iter().filter(|&&a| a == 0.0).count() {
        0 => Ok(MorphologyClass::Cubic),
        1 => Ok(MorphologyClass::Columnar),
        2 => Ok(MorphologyClass::Lamellar),
        _ => Err(DatasetError::DegenerateDesign),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphologyClass {
    Lamellar,
    Columnar,
    Cubic,
}

impl MorphologyClass {
    pub const ALL: [MorphologyClass; 3] = [Self::Lamellar, Self::Columnar, Self::Cubic];

    /// Number of non-zero angles, which is also the input width of the
    /// design path of the class networks.
    pub fn active_angles(self) -> usize {
        self.index() + 1
    }

    pub fn index(self) -> usize {
        match self {
            Self::Lamellar => 0,
            Self::Columnar => 1,
            Self::Cubic => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lamellar => "lamellar",
            Self::Columnar => "columnar",
            Self::Cubic => "cubic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Network hidden widths for this class.
    pub fn hidden_dims(self) -> [usize; 3] {
        match self {
            Self::Lamellar => [16, 16, 16],
            Self::Columnar => [32, 32, 32],
            Self::Cubic => [48, 48, 48],
        }
    }
}

/// Principal loading direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Direction {
    E1,
    E2,
    E3,
}

impl TryFrom<u32> for Direction {
    type Error = DatasetError;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            1 => Ok(Self::E1),
            2 => Ok(Self::E2),
            3 => Ok(Self::E3),
            _ => Err(DatasetError::InvalidDirection(n)),
        }
    }
}

impl From<Direction> for u32 {
    fn from(d: Direction) -> u32 {
        d.number()
    }
}

impl Direction {
    pub const ALL: [Direction; 3] = [Self::E1, Self::E2, Self::E3];

    pub fn index(self) -> usize {
        match self {
            Self::E1 => 0,
            Self::E2 => 1,
            Self::E3 => 2,
        }
    }

    /// 1-based axis number.
    pub fn number(self) -> u32 {
        self.index() as u32 + 1
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn unit_vector(self) -> [f64; 3] {
        let mut e = [0.0; 3];
        e[self.index()] = 1.0;
        e
    }
}

/// Ordered `(strain, stress)` pairs. Stress is dimensionless (divided by the
/// constituent modulus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    strain: Vec<f64>,
    stress: Vec<f64>,
}

impl Curve {
    /// Strains strictly increasing, equal lengths, all values finite.
    pub fn new(strain: Vec<f64>, stress: Vec<f64>) -> Result<Self> {
        if strain.len() != stress.len() {
            return Err(DatasetError::InvalidCurve("strain and stress lengths differ"));
        }
        if strain.is_empty() {
            return Err(DatasetError::InvalidCurve("empty curve"));
        }
        if strain.iter().chain(&stress).any(|x| !x.is_finite()) {
            return Err(DatasetError::InvalidCurve("non-finite value"));
        }
        if strain.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DatasetError::InvalidCurve("strains not strictly increasing"));
        }
        Ok(Self { strain, stress })
    }

    /// Stress given in pressure units, divided by the constituent modulus.
    pub fn from_pressure(strain: Vec<f64>, pressure: Vec<f64>, e_s: f64) -> Result<Self> {
        Self::new(strain, pressure.into_iter().map(|p| p / e_s).collect())
    }

    pub fn strain(&self) -> &[f64] {
        &self.strain
    }

    pub fn stress(&self) -> &[f64] {
        &self.stress
    }

    pub fn len(&self) -> usize {
        self.strain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strain.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { strain: self.strain.clone(), stress: self.stress.iter().map(|s| s * factor).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Experimental,
    Synthetic,
}

/// One loading experiment: a design loaded along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta: DesignParams,
    pub direction: Direction,
    pub curve: Curve,
    pub provenance: Provenance,
}

impl Sample {
    pub fn class(&self) -> Result<MorphologyClass> {
        self.theta.class()
    }
}

/// Fixed uniform strain grid used for training and design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainGrid {
    pub first: f64,
    pub last: f64,
    pub count: usize,
}

impl Default for StrainGrid {
    fn default() -> Self {
        Self { first: 0.001, last: 0.4, count: 80 }
    }
}

impl StrainGrid {
    pub fn spacing(&self) -> f64 {
        (self.last - self.first) / (self.count - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.last } else { self.first + k as f64 * d })
            .collect()
    }
}

/// Scales that map curves and angles into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub e_s: f64,
    pub theta_max: f64,
    pub max_strain: f64,
    pub max_stress: f64,
    pub grid: StrainGrid,
}

impl NormalizationConfig {
    /// Maxima over the given (training) samples, across all directions.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let mut max_strain = 0.0f64;
        let mut max_stress = 0.0f64;
        let mut any = false;
        for s in samples {
            any = true;
            max_strain = s.curve.strain.iter().fold(max_strain, |m, &x| m.max(x));
            max_stress = s.curve.stress.iter().fold(max_stress, |m, &x| m.max(x));
        }
        if !any {
            return Err(DatasetError::Empty);
        }
        let cfg = Self { e_s: DEFAULT_E_S, theta_max: THETA_MAX, max_strain, max_stress, grid: StrainGrid::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_strain > 0.0 && self.max_stress > 0.0 && self.theta_max > 0.0 && self.e_s > 0.0) {
            return Err(DatasetError::ZeroMaximum);
        }
        Ok(())
    }
}

/// A sample mapped into network units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub theta: [f64; 3],
    pub class: MorphologyClass,
    pub direction: Direction,
    pub strain: Vec<f64>,
    pub stress: Vec<f64>,
}

/// Angles by `theta_max`, strain and stress by their maxima. No clipping.
pub fn normalize(sample: &Sample, cfg: &NormalizationConfig) -> Result<NormalizedSample> {
    cfg.validate()?;
    Ok(NormalizedSample {
        theta: sample.theta.normalized(cfg.theta_max),
        class: sample.class()?,
        direction: sample.direction,
        strain: sample.curve.strain.iter().map(|e| e / cfg.max_strain).collect(),
        stress: sample.curve.stress.iter().map(|s| s / cfg.max_stress).collect(),
    })
}

/// Inverse of [`normalize`].
pub fn denormalize(ns: &NormalizedSample, cfg: &NormalizationConfig, provenance: Provenance) -> Result<Sample> {
    cfg.validate()?;
    let theta = ns.theta.map(|t| {
        let a = t * cfg.theta_max;
        // undo the rounding of the forward division at the bounds
        if (a - THETA_MIN).abs() < 1e-9 {
            THETA_MIN
        } else if (a - THETA_MAX).abs() < 1e-9 {
            THETA_MAX
        } else {
            a
        }
    });
    Ok(Sample {
        theta: DesignParams::new(theta)?,
        direction: ns.direction,
        curve: Curve::new(
            ns.strain.iter().map(|e| e * cfg.max_strain).collect(),
            ns.stress.iter().map(|s| s * cfg.max_stress).collect(),
        )?,
        provenance,
    })
}

/// Deterministic split at the unique-design level: every direction of a
/// design lands on the same side. Returns `(train, test)` sample indices.
pub fn split_by_design(samples: &[Sample], seed: u64, test_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut designs: Vec<[u64; 3]> = samples.iter().map(|s| s.theta.canonical().angles().map(f64::to_bits)).collect();
    designs.sort_unstable();
    designs.dedup();
    let mut rng = Rng::new(seed, crate::rng::stream::SPLIT);
    rng.shuffle(&mut designs);
    let n_test = libm::round((designs.len() as f64) * test_fraction) as usize;
    let n_test = n_test.min(designs.len().saturating_sub(1));
    let test_set = &designs[..n_test];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, s) in samples.iter().enumerate() {
        let key = s.theta.canonical().angles().map(f64::to_bits);
        if test_set.contains(&key) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests;
