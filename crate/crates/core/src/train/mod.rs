//! Training of the per-direction submodules and forward-model metrics.

mod adam;
mod metrics;
mod registry;

pub use adam::{AdamConfig, AdamState};
pub use metrics::{evaluate_metrics, predict_test_set, r_squared, MapeEntry, Metrics};
pub use registry::{ModelRegistry, REGISTRY_SCHEMA_VERSION};

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    canonical_equivalents, interpolate_curve, normalize, DatasetError, Direction, MorphologyClass, NormalizationConfig,
    NormalizedSample, Sample,
};
use crate::diffkit::{DiffError, Mat, Tape, Var};
use crate::picnn::{energy_batch, BoundModel, OffsetNetVars, Params, PicnnError, PicnnVars, Submodule};
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("parameter and gradient shapes differ")]
    ShapeMismatch,
    #[error("no training data")]
    Empty,
    #[error("sample for direction {got:?} passed to the {expected:?} submodule")]
    WrongDirection { expected: Direction, got: Direction },
    #[error("non-finite loss at epoch {0}")]
    NonFinite(usize),
    #[error("R^2 undefined: target has no variance")]
    DegenerateVariance,
    #[error("registry has no submodule for direction {0:?}")]
    Untrained(Direction),
    #[error(transparent)]
    Picnn(#[from] PicnnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl From<DiffError> for TrainError {
    fn from(e: DiffError) -> Self {
        Self::Picnn(PicnnError::Diff(e))
    }
}

pub type Result<T> = core::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Strain points per minibatch.
    pub batch_size: usize,
    pub k_t: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Stop after this many epochs without improvement; off when `None`.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            epochs: 3000,
            batch_size: 512,
            k_t: crate::picnn::DEFAULT_K_T,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.eps_adam }
    }
}

/// Mean absolute percentage error; points with a zero target contribute 0
/// but still count in the mean.
pub fn mape_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(TrainError::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target).map(|(&p, &t)| if t == 0.0 { 0.0 } else { ((p - t) / t).abs() }).sum();
    Ok(sum / pred.len() as f64)
}

/// `sum_j |pred_j - target_j| / |target_j|` as a tape node; zero-target
/// points get zero weight and therefore zero gradient.
pub fn mape_sum_node(tape: &mut Tape, pred: Var, target: &[f64]) -> crate::diffkit::Result<Var> {
    let t = tape.constant(Mat::row(target.to_vec()));
    let w = tape.constant(Mat::row(target.iter().map(|&x| if x == 0.0 { 0.0 } else { 1.0 / x.abs() }).collect()));
    let d = tape.sub(pred, t)?;
    let d = tape.abs(d)?;
    let d = tape.mul(d, w)?;
    tape.sum(d)
}

/// Interpolate onto the configured grid, add tie-related directions of the
/// canonical design, normalize, and bucket by direction.
pub fn preprocess(samples: &[Sample], norm: &NormalizationConfig) -> Result<[Vec<NormalizedSample>; 3]> {
    let mut out: [Vec<NormalizedSample>; 3] = [vec![], vec![], vec![]];
    for s in samples {
        let curve = interpolate_curve(&s.curve, &norm.grid)?;
        let on_grid = Sample { curve, ..s.clone() };
        for img in canonical_equivalents(&on_grid)? {
            out[img.direction.index()].push(normalize(&img, norm)?);
        }
    }
    Ok(out)
}

/// Points of one sample taking part in a minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGroup {
    pub sample: usize,
    pub points: Vec<usize>,
}

/// Minibatch partitioned by morphology class (indexed by
/// [`MorphologyClass::index`]).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub classes: [Vec<BatchGroup>; 3],
}

impl Batch {
    pub fn point_count(&self) -> usize {
        self.classes.iter().flatten().map(|g| g.points.len()).sum()
    }

    /// Every point of every sample in one batch.
    pub fn full(data: &[NormalizedSample]) -> Self {
        let mut b = Batch::default();
        for (i, s) in data.iter().enumerate() {
            b.classes[s.class.index()].push(BatchGroup { sample: i, points: (0..s.strain.len()).collect() });
        }
        b
    }
}

/// Shuffle all `(sample, point)` pairs and cut them into batches of
/// `batch_size` points.
pub fn make_batches(data: &[NormalizedSample], batch_size: usize, rng: &mut Rng) -> Vec<Batch> {
    let mut pairs: Vec<(u32, u32)> =
        data.iter().enumerate().flat_map(|(i, s)| (0..s.strain.len() as u32).map(move |t| (i as u32, t))).collect();
    rng.shuffle(&mut pairs);
    pairs
        .chunks_mut(batch_size.max(1))
        .map(|chunk| {
            chunk.sort_unstable();
            let mut b = Batch::default();
            for &(s, t) in chunk.iter() {
                let cls = &mut b.classes[data[s as usize].class.index()];
                match cls.last_mut() {
                    Some(g) if g.sample == s as usize => g.points.push(t as usize),
                    _ => cls.push(BatchGroup { sample: s as usize, points: vec![t as usize] }),
                }
            }
            b
        })
        .collect()
}

/// Batch MAPE and its gradient with respect to every parameter of the
/// submodule, in [`Params::mats`] order.
pub fn loss_and_gradient(sub: &Submodule, data: &[NormalizedSample], batch: &Batch) -> Result<(f64, Vec<Mat>)> {
    let mut tape = Tape::new();
    let mut leaves = Vec::new();
    let mut pairs = Vec::with_capacity(3);
    for p in &sub.pairs {
        let a = PicnnVars::bind(&mut tape, &p.picnn1, &mut leaves)?;
        let b = PicnnVars::bind(&mut tape, &p.picnn2, &mut leaves)?;
        pairs.push((a, b));
    }
    let bnet = OffsetNetVars::bind(&mut tape, &sub.bnet, &mut leaves);
    let vnet = OffsetNetVars::bind(&mut tape, &sub.vnet, &mut leaves);

    let n = batch.point_count();
    let mut total: Option<Var> = None;
    for class in MorphologyClass::ALL {
        let groups = &batch.classes[class.index()];
        if groups.is_empty() {
            continue;
        }
        let theta = tape.constant(Mat::from_fn(3, groups.len(), |i, j| data[groups[j].sample].theta[i]));
        let strains: Vec<Vec<f64>> =
            groups.iter().map(|g| g.points.iter().map(|&t| data[g.sample].strain[t]).collect()).collect();
        let targets: Vec<f64> =
            groups.iter().flat_map(|g| g.points.iter().map(|&t| data[g.sample].stress[t])).collect();
        let refs: Vec<&[f64]> = strains.iter().map(Vec::as_slice).collect();
        let (p1, p2) = &pairs[class.index()];
        let bound = BoundModel {
            picnn1: p1,
            picnn2: p2,
            bnet: &bnet,
            vnet: &vnet,
            active_angles: class.active_angles(),
            k_t: sub.k_t,
        };
        let e = energy_batch(&mut tape, &bound, theta, &refs)?;
        let part = mape_sum_node(&mut tape, e.sigma, &targets)?;
        total = Some(match total {
            Some(t) => tape.add(t, part)?,
            None => part,
        });
    }
    let Some(total) = total else { return Err(TrainError::Empty) };
    let loss = tape.scale(total, 1.0 / n as f64)?;
    let grads = tape.backward(loss)?;
    let g = leaves.iter().map(|&v| grads.wrt(v, tape.value(v).shape())).collect();
    Ok((tape.scalar(loss), g))
}

/// One training epoch's summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Point-weighted mean of the minibatch losses.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub history: Vec<EpochLog>,
    /// Classes with no samples for this direction; their networks are left
    /// untouched.
    pub skipped_classes: Vec<MorphologyClass>,
}

/// Train one submodule on the normalized samples of its direction. The
/// classes are routed to their own PICNN pair and share the offset nets.
pub fn train_submodule(
    sub: &mut Submodule,
    data: &[NormalizedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    if let Some(s) = data.iter().find(|s| s.direction != sub.direction) {
        return Err(TrainError::WrongDirection { expected: sub.direction, got: s.direction });
    }
    sub.k_t = cfg.k_t;
    let mut report = TrainReport {
        skipped_classes: MorphologyClass::ALL.into_iter().filter(|c| !data.iter().any(|s| s.class == *c)).collect(),
        ..Default::default()
    };
    let mut rng = Rng::new(cfg.seed, stream::BATCH + sub.direction.index() as u64);
    let mut adam = AdamState::new(&sub.mats());
    let adam_cfg = cfg.adam();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        let mut weighted = 0.0;
        let mut points = 0;
        for batch in make_batches(data, cfg.batch_size, &mut rng) {
            let (loss, grads) = loss_and_gradient(sub, data, &batch)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite(epoch));
            }
            adam.step(&mut sub.mats_mut(), &grads, &adam_cfg)?;
            let n = batch.point_count();
            weighted += loss * n as f64;
            points += n;
        }
        let log = EpochLog { epoch, loss: weighted / points as f64 };
        on_epoch(&log);
        report.history.push(log);
        if let Some(p) = cfg.patience {
            if log.loss < best {
                best = log.loss;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= p {
                    break;
                }
            }
        }
    }
    Ok(report)
}

/// Start the target submodule from the source submodule's weights.
pub fn transfer_init(from: &Submodule, to: &mut Submodule) -> Result<()> {
    Ok(to.copy_weights_from(from)?)
}

/// Fresh submodule with the class hidden widths.
pub fn init_submodule(direction: Direction, seed: u64) -> Submodule {
    let mut rng = Rng::new(seed, stream::INIT + direction.index() as u64);
    Submodule::init(direction, &mut rng)
}

/// Train all three directions: `e2` and `e3` from scratch, then `e1` from
/// the trained `e2` weights when `transfer` is set. `on_epoch` receives the
/// direction with every epoch.
pub fn train_registry(
    train: &[Sample],
    cfg: &TrainConfig,
    transfer: bool,
    mut on_epoch: impl FnMut(Direction, &EpochLog),
) -> Result<(ModelRegistry, [TrainReport; 3])> {
    let norm = NormalizationConfig::fit(train)?;
    let data = preprocess(train, &norm)?;
    let mut subs: Vec<Submodule> = Direction::ALL.iter().map(|&d| init_submodule(d, cfg.seed)).collect();
    let mut reports: [TrainReport; 3] = Default::default();
    for d in [Direction::E2, Direction::E3, Direction::E1] {
        if d == Direction::E1 && transfer {
            let (head, tail) = subs.split_at_mut(1);
            transfer_init(&tail[0], &mut head[0])?;
        }
        let i = d.index();
        reports[i] = train_submodule(&mut subs[i], &data[i], cfg, |log| on_epoch(d, log))?;
    }
    Ok((ModelRegistry::new(subs, norm)?, reports))
}
