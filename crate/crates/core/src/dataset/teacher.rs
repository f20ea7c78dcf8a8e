//! Synthetic ground truth: randomly initialized energy models whose curves
//! stand in for measured data.
//!
//! The teacher shares the student architecture. Its energy-offset nets are
//! biased so the second well stays far above the first, which keeps every
//! emitted stress nonnegative. The lamellar networks of direction 2 are
//! copies of direction 1, since the two axes are equivalent for `[0, 0, t]`.
//! Each (direction, class) model gets its own output scale, calibrated so its
//! stress at the reference design is within half a decade of a common level.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{Curve, DesignParams, Direction, MorphologyClass, Provenance, Result, Sample, StrainGrid, THETA_MAX, THETA_MIN};
use crate::picnn::{OffsetNetWeights, Submodule, OFFSET_NET_HIDDEN};
use crate::rng::{stream, Rng};

/// Output bias of the teacher's energy-offset nets (`v` near 12).
pub const TEACHER_V_BIAS: f64 = 12.0;
/// Raw strain that maps to unit teacher strain.
pub const TEACHER_STRAIN_SCALE: f64 = 0.4;
/// Typical raw end-of-grid stress, in units of `E_s`.
pub const TEACHER_STRESS_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub seed: u64,
    pub n_per_class: usize,
    /// Relative standard deviation of multiplicative Gaussian noise.
    pub noise: f64,
    pub grid: StrainGrid,
}

impl TeacherConfig {
    pub fn new(seed: u64, n_per_class: usize) -> Self {
        Self { seed, n_per_class, noise: 0.0, grid: StrainGrid::default() }
    }
}

/// One submodule per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Teacher {
    pub submodules: Vec<Submodule>,
    pub strain_scale: f64,
    /// Raw stress per unit model stress, by direction then class.
    pub stress_scale: [[f64; 3]; 3],
}

impl Teacher {
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::new(seed, stream::TEACHER);
        let mut submodules: Vec<Submodule> = Direction::ALL
            .iter()
            .map(|&d| {
                let mut s = Submodule::init(d, &mut rng);
                s.vnet = OffsetNetWeights::init(&OFFSET_NET_HIDDEN, TEACHER_V_BIAS, &mut rng);
                s
            })
            .collect();
        let lam = MorphologyClass::Lamellar.index();
        submodules[1].pairs[lam] = submodules[0].pairs[lam].clone();
        submodules[1].bnet = submodules[0].bnet.clone();
        submodules[1].vnet = submodules[0].vnet.clone();
        let mut t = Self { submodules, strain_scale: TEACHER_STRAIN_SCALE, stress_scale: [[1.0; 3]; 3] };
        for d in Direction::ALL {
            for c in MorphologyClass::ALL {
                let reference = DesignParams::new(reference_design(c)).expect("in bounds");
                let end = t.curve(&reference, d, &[TEACHER_STRAIN_SCALE]).expect("teacher evaluation").stress()[0];
                let jitter = libm::pow(10.0, rng.uniform_in(-0.5, 0.5));
                t.stress_scale[d.index()][c.index()] = TEACHER_STRESS_LEVEL * jitter / end;
            }
        }
        t.stress_scale[1][lam] = t.stress_scale[0][lam];
        t
    }

    pub fn submodule(&self, d: Direction) -> &Submodule {
        &self.submodules[d.index()]
    }

    /// Raw curves (stress in units of `E_s`) for canonical designs of one
    /// class along one direction.
    pub fn curves(&self, thetas: &[DesignParams], direction: Direction, strains: &[f64]) -> crate::picnn::Result<Vec<Curve>> {
        let Some(first) = thetas.first() else { return Ok(Vec::new()) };
        let class = first.canonical().class().expect("valid design");
        let view = self.submodule(direction).view(class);
        let inputs: Vec<[f64; 3]> = thetas.iter().map(|t| t.canonical().normalized(THETA_MAX)).collect();
        let scaled: Vec<f64> = strains.iter().map(|e| e / self.strain_scale).collect();
        let groups: Vec<&[f64]> = inputs.iter().map(|_| scaled.as_slice()).collect();
        let evals = view.evaluate_batch(&inputs, &groups)?;
        Ok(evals
            .into_iter()
            .map(|e| {
                let scale = self.stress_scale[direction.index()][class.index()];
                let stress = e.sigma.iter().map(|s| s * scale).collect();
                Curve::new(strains.to_vec(), stress).expect("finite teacher curve")
            })
            .collect())
    }

    pub fn curve(&self, theta: &DesignParams, direction: Direction, strains: &[f64]) -> crate::picnn::Result<Curve> {
        Ok(self.curves(core::slice::from_ref(theta), direction, strains)?.remove(0))
    }
}

/// All active angles at 45 degrees.
fn reference_design(class: MorphologyClass) -> [f64; 3] {
    let mut theta = [0.0; 3];
    for t in theta.iter_mut().skip(3 - class.active_angles()) {
        *t = 45.0;
    }
    theta
}

/// Uniform random canonical design of a class.
pub fn sample_design(class: MorphologyClass, rng: &mut Rng) -> DesignParams {
    let m = class.active_angles();
    let mut theta = [0.0; 3];
    for t in theta.iter_mut().skip(3 - m) {
        *t = rng.uniform_in(THETA_MIN, THETA_MAX);
    }
    DesignParams::new(theta).expect("in bounds").canonical()
}

/// `n_per_class` canonical designs per class, each loaded along all three
/// directions. Samples are ordered by class, design, then direction.
pub fn synthesize_teacher_dataset(cfg: &TeacherConfig) -> Result<(Vec<Sample>, Teacher)> {
    if cfg.n_per_class == 0 {
        return Err(super::DatasetError::Empty);
    }
    let teacher = Teacher::new(cfg.seed);
    let mut theta_rng = Rng::new(cfg.seed, stream::TEACHER_THETA);
    let mut noise_rng = Rng::new(cfg.seed, stream::TEACHER_NOISE);
    let strains = cfg.grid.points();
    let mut samples = Vec::with_capacity(cfg.n_per_class * 9);
    for class in MorphologyClass::ALL {
        let thetas: Vec<DesignParams> = (0..cfg.n_per_class).map(|_| sample_design(class, &mut theta_rng)).collect();
        let per_dir: Vec<Vec<Curve>> = Direction::ALL
            .iter()
            .map(|&d| teacher.curves(&thetas, d, &strains).expect("teacher evaluation"))
            .collect();
        for (i, theta) in thetas.iter().enumerate() {
            for d in Direction::ALL {
                let mut curve = per_dir[d.index()][i].clone();
                if cfg.noise > 0.0 {
                    let stress = curve.stress().iter().map(|s| s * (1.0 + cfg.noise * noise_rng.normal())).collect();
                    curve = Curve::new(curve.strain().to_vec(), stress)?;
                }
                samples.push(Sample { theta: *theta, direction: d, curve, provenance: Provenance::Synthetic });
            }
        }
    }
    Ok((samples, teacher))
}
