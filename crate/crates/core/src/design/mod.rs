//! Multi-start gradient-based inverse design.
//!
//! Every (direction, class) case gets `S` random starts. Each start runs Adam
//! on the normalized active angles, sorting them before every forward pass
//! and clamping them to the angle bounds after every step.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{interpolate_curve, Curve, DatasetError, DesignParams, Direction, MorphologyClass, THETA_MAX, THETA_MIN};
use crate::diffkit::{DiffError, Mat, Tape};
use crate::picnn::{energy_batch, BoundModel, OffsetNetVars, PicnnError, PicnnVars};
use crate::rng::{stream, Rng};
use crate::train::{mape_sum_node, AdamConfig, AdamState, ModelRegistry, TrainError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("kappa must be positive, got {0}")]
    InvalidKappa(f64),
    #[error("no starts to run")]
    NoStarts,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Picnn(#[from] PicnnError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl From<DiffError> for DesignError {
    fn from(e: DiffError) -> Self {
        Self::Picnn(PicnnError::Diff(e))
    }
}

pub type Result<T> = core::result::Result<T, DesignError>;

pub const DEFAULT_KAPPA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Guesses per (direction, class) case.
    pub starts: usize,
    pub epochs: usize,
    pub kappa: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            starts: 10,
            epochs: 30,
            kappa: DEFAULT_KAPPA,
            seed: 0,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

impl DesignConfig {
    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.eps_adam }
    }
}

/// Target stress-strain curve, already multiplied by `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTarget {
    pub curve: Curve,
    pub kappa: f64,
}

/// Multiply the stress by `kappa`; strains are unchanged.
pub fn scale_target(curve: &Curve, kappa: f64) -> Result<DesignTarget> {
    if !(kappa > 0.0) {
        return Err(DesignError::InvalidKappa(kappa));
    }
    Ok(DesignTarget { curve: curve.scaled(kappa), kappa })
}

/// Stable ascending sort.
pub fn sort_theta(theta: [f64; 3]) -> [f64; 3] {
    let mut t = theta;
    crate::dataset::sort3(&mut t);
    t
}

fn sort_active(x: &mut [f64]) {
    // stable insertion sort
    for i in 1..x.len() {
        let mut j = i;
        while j > 0 && x[j - 1] > x[j] {
            x.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// One optimization start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSpec {
    pub id: usize,
    pub direction: Direction,
    pub class: MorphologyClass,
    /// Normalized active angles before the first sort.
    pub initial: Vec<f64>,
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub id: usize,
    pub direction: Direction,
    pub class: MorphologyClass,
    /// Loss at each epoch's forward pass.
    pub losses: Vec<f64>,
    /// Loss at the final (sorted, clamped) angles.
    pub final_loss: f64,
    pub theta: DesignParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub theta_star: DesignParams,
    pub direction_star: Direction,
    pub best_loss: f64,
    pub traces: Vec<StartTrace>,
}

/// Start `id = s * 9 + direction * 3 + class`, seeded from its own stream, so
/// the first `9 S` starts are the same for any larger `S`.
pub fn start_specs(cfg: &DesignConfig) -> Vec<StartSpec> {
    let lo = THETA_MIN / THETA_MAX;
    let mut out = Vec::with_capacity(9 * cfg.starts);
    for s in 0..cfg.starts {
        for direction in Direction::ALL {
            for class in MorphologyClass::ALL {
                let id = s * 9 + direction.index() * 3 + class.index();
                let mut rng = Rng::new(cfg.seed, stream::DESIGN + id as u64);
                let initial = (0..class.active_angles()).map(|_| rng.uniform_in(lo, 1.0)).collect();
                out.push(StartSpec { id, direction, class, initial });
            }
        }
    }
    out
}

/// Target in network units: stress on the registry grid divided by the
/// registry's stress scale.
pub fn normalized_target(registry: &ModelRegistry, target: &DesignTarget) -> Result<(Vec<f64>, Vec<f64>)> {
    let curve = interpolate_curve(&target.curve, &registry.norm.grid)?;
    let strains = curve.strain().iter().map(|e| e / registry.norm.max_strain).collect();
    let stress = curve.stress().iter().map(|s| s / registry.norm.max_stress).collect();
    Ok((strains, stress))
}

/// Design MAPE and its gradient with respect to the normalized active angles
/// `x` (taken as given, not sorted).
pub fn design_loss_and_gradient(
    registry: &ModelRegistry,
    direction: Direction,
    class: MorphologyClass,
    x: &[f64],
    strains: &[f64],
    target: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let m = class.active_angles();
    if x.len() != m {
        return Err(PicnnError::DimensionMismatch { expected: m, got: x.len() }.into());
    }
    let view = registry.submodule(direction).view(class);
    let mut tape = Tape::new();
    let mut leaves = Vec::new();
    let p1 = PicnnVars::bind(&mut tape, view.picnn1, &mut leaves)?;
    let p2 = PicnnVars::bind(&mut tape, view.picnn2, &mut leaves)?;
    let bnet = OffsetNetVars::bind(&mut tape, view.bnet, &mut leaves);
    let vnet = OffsetNetVars::bind(&mut tape, view.vnet, &mut leaves);
    let mut col = vec![0.0; 3 - m];
    col.extend_from_slice(x);
    let theta = tape.leaf(Mat::col(col));
    let bound = BoundModel { picnn1: &p1, picnn2: &p2, bnet: &bnet, vnet: &vnet, active_angles: m, k_t: view.k_t };
    let e = energy_batch(&mut tape, &bound, theta, &[strains])?;
    let sum = mape_sum_node(&mut tape, e.sigma, target)?;
    let loss = tape.scale(sum, 1.0 / target.len() as f64)?;
    let g = tape.backward(loss)?.wrt(theta, (3, 1));
    Ok((tape.scalar(loss), g.data()[3 - m..].to_vec()))
}

fn to_design(class: MorphologyClass, x: &[f64]) -> DesignParams {
    let m = class.active_angles();
    let mut theta = [0.0; 3];
    for (t, &v) in theta[3 - m..].iter_mut().zip(x) {
        *t = (v * THETA_MAX).clamp(THETA_MIN, THETA_MAX);
    }
    DesignParams::new(theta).expect("clamped into bounds")
}

/// Run one start for `cfg.epochs` Adam steps.
pub fn run_start(
    registry: &ModelRegistry,
    spec: &StartSpec,
    strains: &[f64],
    target: &[f64],
    cfg: &DesignConfig,
) -> Result<StartTrace> {
    let lo = THETA_MIN / THETA_MAX;
    let m = spec.initial.len();
    let mut x = Mat::row(spec.initial.clone());
    let mut adam = AdamState::new(&[&x]);
    let adam_cfg = cfg.adam();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        sort_active(x.data_mut());
        let (loss, g) = design_loss_and_gradient(registry, spec.direction, spec.class, x.data(), strains, target)?;
        losses.push(loss);
        let g = Mat::from_vec(1, m, g).expect("shape");
        adam.step(&mut [&mut x], &[g], &adam_cfg)?;
        for v in x.data_mut() {
            *v = v.clamp(lo, 1.0);
        }
    }
    sort_active(x.data_mut());
    let (final_loss, _) = design_loss_and_gradient(registry, spec.direction, spec.class, x.data(), strains, target)?;
    Ok(StartTrace {
        id: spec.id,
        direction: spec.direction,
        class: spec.class,
        losses,
        final_loss,
        theta: to_design(spec.class, x.data()),
    })
}

/// Executes independent starts; implementations may run them concurrently
/// but must return results in input order.
pub trait StartRunner {
    fn run(&self, specs: &[StartSpec], job: &(dyn Fn(&StartSpec) -> Result<StartTrace> + Sync)) -> Vec<Result<StartTrace>>;
}

/// Runs starts one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialRunner;

impl StartRunner for SerialRunner {
    fn run(&self, specs: &[StartSpec], job: &(dyn Fn(&StartSpec) -> Result<StartTrace> + Sync)) -> Vec<Result<StartTrace>> {
        specs.iter().map(job).collect()
    }
}

/// Best start by `(final_loss, id)`.
pub fn optimize_with(
    target: &DesignTarget,
    registry: &ModelRegistry,
    cfg: &DesignConfig,
    runner: &dyn StartRunner,
) -> Result<DesignResult> {
    let specs = start_specs(cfg);
    if specs.is_empty() {
        return Err(DesignError::NoStarts);
    }
    let (strains, stress) = normalized_target(registry, target)?;
    let job = |s: &StartSpec| run_start(registry, s, &strains, &stress, cfg);
    let traces = runner.run(&specs, &job).into_iter().collect::<Result<Vec<_>>>()?;
    let best = traces
        .iter()
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss).then(a.id.cmp(&b.id)))
        .expect("non-empty");
    Ok(DesignResult {
        theta_star: best.theta,
        direction_star: best.direction,
        best_loss: best.final_loss,
        traces,
    })
}

pub fn optimize(target: &DesignTarget, registry: &ModelRegistry, cfg: &DesignConfig) -> Result<DesignResult> {
    optimize_with(target, registry, cfg, &SerialRunner)
}
