//! Partially input-convex networks and the two-well relaxed energy.
//!
//! `W1` is a convex well pinned at the origin (zero energy, zero stress).
//! `W2` is a convex well whose minimum sits at strain `b` with height
//! `v + W1(b)`. The relaxed energy is their softmin at temperature `k_T`, and
//! the stress is its strain derivative taken through the tangent channel.

mod graph;
mod weights;

pub use graph::{energy_batch, BoundModel, EnergyNodes, OffsetNetVars, PicnnVars};
pub use weights::{DenseLayer, OffsetNetWeights, Params, PicnnLayer, PicnnWeights, SkipWeights, OFFSET_NET_HIDDEN};

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Direction, MorphologyClass};
use crate::diffkit::{DiffError, Mat, Tape};
use crate::math;
use crate::rng::Rng;

pub const DEFAULT_K_T: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PicnnError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("design input has {got} components, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k_T must be positive, got {0}")]
    InvalidKt(f64),
    #[error("network shapes differ")]
    ShapeMismatch,
}

pub type Result<T> = core::result::Result<T, PicnnError>;

/// Raw network output for one strain and one design input.
pub fn picnn_forward(w: &PicnnWeights, eps: f64, theta: &[f64]) -> Result<f64> {
    Ok(picnn_forward_with_slope(w, eps, theta)?.0)
}

/// Network output and its strain derivative.
pub fn picnn_forward_with_slope(w: &PicnnWeights, eps: f64, theta: &[f64]) -> Result<(f64, f64)> {
    if theta.len() != w.design_dim {
        return Err(PicnnError::DimensionMismatch { expected: w.design_dim, got: theta.len() });
    }
    let mut tape = Tape::new();
    let mut leaves = Vec::new();
    let vars = PicnnVars::bind(&mut tape, w, &mut leaves)?;
    let u0 = tape.constant(Mat::col(theta.to_vec()));
    let z0 = tape.seeded_leaf(Mat::scalar(eps), Mat::scalar(1.0))?;
    let p = vars.forward(&mut tape, u0, z0, &[0])?;
    let dp = tape.tangent_of(p)?;
    Ok((tape.scalar(p), tape.scalar(dp)))
}

/// Softmin of the two wells and the weight of the first:
/// `gamma1 = 1 / (exp(-(W2 - W1) / k_T) + 1)`.
pub fn combine_relaxed(w1: f64, w2: f64, k_t: f64) -> (f64, f64) {
    let lo = w1.min(w2);
    let w = lo - k_t * math::ln_1p(math::exp(-(w1 - w2).abs() / k_t));
    (w, math::logistic((w2 - w1) / k_t))
}

/// Mixture energy for an explicit phase fraction `gamma1` in `(0, 1)`.
pub fn mixture_energy(w1: f64, w2: f64, k_t: f64, gamma1: f64) -> f64 {
    let g2 = 1.0 - gamma1;
    gamma1 * w1 + g2 * w2 + k_t * (gamma1 * math::ln(gamma1) + g2 * math::ln(g2))
}

/// Borrowed view of the four networks that define one energy model.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    pub class: MorphologyClass,
    pub k_t: f64,
    pub picnn1: &'a PicnnWeights,
    pub picnn2: &'a PicnnWeights,
    pub bnet: &'a OffsetNetWeights,
    pub vnet: &'a OffsetNetWeights,
}

/// Per-point values of one evaluated curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEval {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w: Vec<f64>,
    pub sigma: Vec<f64>,
    pub b: f64,
    pub v: f64,
}

impl CurveEval {
    /// Phase fraction of the first well at each point.
    pub fn gamma1(&self, k_t: f64) -> Vec<f64> {
        self.w1.iter().zip(&self.w2).map(|(&a, &b)| combine_relaxed(a, b, k_t).1).collect()
    }
}

impl<'a> ModelView<'a> {
    /// Evaluate many curves at once. `thetas` are normalized, canonical and
    /// zero-padded; `strains[g]` are normalized.
    pub fn evaluate_batch(&self, thetas: &[[f64; 3]], strains: &[&[f64]]) -> Result<Vec<CurveEval>> {
        if thetas.len() != strains.len() {
            return Err(PicnnError::DimensionMismatch { expected: thetas.len(), got: strains.len() });
        }
        let mut tape = Tape::new();
        let mut leaves = Vec::new();
        let p1 = PicnnVars::bind(&mut tape, self.picnn1, &mut leaves)?;
        let p2 = PicnnVars::bind(&mut tape, self.picnn2, &mut leaves)?;
        let bn = OffsetNetVars::bind(&mut tape, self.bnet, &mut leaves);
        let vn = OffsetNetVars::bind(&mut tape, self.vnet, &mut leaves);
        let theta = tape.constant(Mat::from_fn(3, thetas.len(), |i, j| thetas[j][i]));
        let bound = BoundModel {
            picnn1: &p1,
            picnn2: &p2,
            bnet: &bn,
            vnet: &vn,
            active_angles: self.class.active_angles(),
            k_t: self.k_t,
        };
        let e = energy_batch(&mut tape, &bound, theta, strains)?;
        let mut out = Vec::with_capacity(strains.len());
        let mut start = 0;
        for (g, s) in strains.iter().enumerate() {
            let range = start..start + s.len();
            let take = |v| tape.value(v).data()[range.clone()].to_vec();
            out.push(CurveEval {
                w1: take(e.w1),
                w2: take(e.w2),
                w: take(e.w),
                sigma: take(e.sigma),
                b: tape.value(e.b).data()[g],
                v: tape.value(e.v).data()[g],
            });
            start += s.len();
        }
        Ok(out)
    }

    pub fn evaluate(&self, theta: &[f64; 3], strains: &[f64]) -> Result<CurveEval> {
        Ok(self.evaluate_batch(core::slice::from_ref(theta), &[strains])?.remove(0))
    }

    fn point(&self, eps: f64, theta: &[f64; 3]) -> Result<CurveEval> {
        self.evaluate(theta, &[eps])
    }
}

/// One loading direction and morphology class: two PICNNs, the offset nets
/// and the relaxation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub direction: Direction,
    pub class: MorphologyClass,
    pub k_t: f64,
    pub picnn1: PicnnWeights,
    pub picnn2: PicnnWeights,
    pub bnet: OffsetNetWeights,
    pub vnet: OffsetNetWeights,
}

impl EnergyModel {
    pub fn init(direction: Direction, class: MorphologyClass, hidden: &[usize], rng: &mut Rng) -> Self {
        let m = class.active_angles();
        Self {
            direction,
            class,
            k_t: DEFAULT_K_T,
            picnn1: PicnnWeights::init(m, hidden, rng),
            picnn2: PicnnWeights::init(m, hidden, rng),
            bnet: OffsetNetWeights::init(&OFFSET_NET_HIDDEN, B_NET_OUTPUT_BIAS, rng),
            vnet: OffsetNetWeights::init(&OFFSET_NET_HIDDEN, V_NET_OUTPUT_BIAS, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_t > 0.0) {
            return Err(PicnnError::InvalidKt(self.k_t));
        }
        for p in [&self.picnn1, &self.picnn2] {
            if p.design_dim != self.class.active_angles() {
                return Err(PicnnError::DimensionMismatch { expected: self.class.active_angles(), got: p.design_dim });
            }
        }
        Ok(())
    }

    pub fn view(&self) -> ModelView<'_> {
        ModelView {
            class: self.class,
            k_t: self.k_t,
            picnn1: &self.picnn1,
            picnn2: &self.picnn2,
            bnet: &self.bnet,
            vnet: &self.vnet,
        }
    }
}

/// Initial output bias of the strain-offset net: `b` starts near 0.31.
pub const B_NET_OUTPUT_BIAS: f64 = -1.0;
/// Initial output bias of the energy-offset net: `v` starts near 0.13.
pub const V_NET_OUTPUT_BIAS: f64 = -2.0;

/// `W1(eps, theta)` for normalized, canonical, zero-padded `theta`.
pub fn potential_w1(model: &EnergyModel, eps: f64, theta: &[f64; 3]) -> Result<f64> {
    Ok(model.view().point(eps, theta)?.w1[0])
}

pub fn potential_w2(model: &EnergyModel, eps: f64, theta: &[f64; 3]) -> Result<f64> {
    Ok(model.view().point(eps, theta)?.w2[0])
}

/// Relaxed energy `W`.
pub fn energy(model: &EnergyModel, eps: f64, theta: &[f64; 3]) -> Result<f64> {
    Ok(model.view().point(eps, theta)?.w[0])
}

/// Normalized stress `dW/deps`.
pub fn stress(model: &EnergyModel, eps: f64, theta: &[f64; 3]) -> Result<f64> {
    Ok(model.view().point(eps, theta)?.sigma[0])
}

/// Offsets `(b, v)`.
pub fn offsets(model: &EnergyModel, theta: &[f64; 3]) -> Result<(f64, f64)> {
    let e = model.view().point(0.0, theta)?;
    Ok((e.b, e.v))
}

/// The PICNN pair of one morphology class within a submodule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicnnPair {
    pub picnn1: PicnnWeights,
    pub picnn2: PicnnWeights,
}

/// Everything learned for one loading direction: a PICNN pair per class and
/// offset nets shared across classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submodule {
    pub direction: Direction,
    pub k_t: f64,
    /// Indexed by [`MorphologyClass::index`].
    pub pairs: Vec<PicnnPair>,
    pub bnet: OffsetNetWeights,
    pub vnet: OffsetNetWeights,
}

impl Submodule {
    /// Class hidden widths from [`MorphologyClass::hidden_dims`].
    pub fn init(direction: Direction, rng: &mut Rng) -> Self {
        Self::init_with_dims(direction, |c| c.hidden_dims().to_vec(), rng)
    }

    pub fn init_with_dims(direction: Direction, dims: impl Fn(MorphologyClass) -> Vec<usize>, rng: &mut Rng) -> Self {
        let pairs = MorphologyClass::ALL
            .iter()
            .map(|&c| {
                let h = dims(c);
                PicnnPair {
                    picnn1: PicnnWeights::init(c.active_angles(), &h, rng),
                    picnn2: PicnnWeights::init(c.active_angles(), &h, rng),
                }
            })
            .collect();
        Self {
            direction,
            k_t: DEFAULT_K_T,
            pairs,
            bnet: OffsetNetWeights::init(&OFFSET_NET_HIDDEN, B_NET_OUTPUT_BIAS, rng),
            vnet: OffsetNetWeights::init(&OFFSET_NET_HIDDEN, V_NET_OUTPUT_BIAS, rng),
        }
    }

    pub fn view(&self, class: MorphologyClass) -> ModelView<'_> {
        let p = &self.pairs[class.index()];
        ModelView { class, k_t: self.k_t, picnn1: &p.picnn1, picnn2: &p.picnn2, bnet: &self.bnet, vnet: &self.vnet }
    }

    pub fn energy_model(&self, class: MorphologyClass) -> EnergyModel {
        let p = &self.pairs[class.index()];
        EnergyModel {
            direction: self.direction,
            class,
            k_t: self.k_t,
            picnn1: p.picnn1.clone(),
            picnn2: p.picnn2.clone(),
            bnet: self.bnet.clone(),
            vnet: self.vnet.clone(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.pairs.len() == other.pairs.len()
            && self.pairs.iter().zip(&other.pairs).all(|(a, b)| a.picnn1.same_shape(&b.picnn1) && a.picnn2.same_shape(&b.picnn2))
            && self.bnet.same_shape(&other.bnet)
            && self.vnet.same_shape(&other.vnet)
    }

    /// Copy every weight from `source`, keeping this submodule's direction.
    pub fn copy_weights_from(&mut self, source: &Submodule) -> Result<()> {
        if !self.same_shape(source) {
            return Err(PicnnError::ShapeMismatch);
        }
        let direction = self.direction;
        *self = source.clone();
        self.direction = direction;
        Ok(())
    }
}

impl Params for Submodule {
    fn mats(&self) -> Vec<&Mat> {
        let mut v = vec![];
        for p in &self.pairs {
            v.extend(p.picnn1.mats());
            v.extend(p.picnn2.mats());
        }
        v.extend(self.bnet.mats());
        v.extend(self.vnet.mats());
        v
    }

    fn mats_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = vec![];
        for p in &mut self.pairs {
            v.extend(p.picnn1.mats_mut());
            v.extend(p.picnn2.mats_mut());
        }
        v.extend(self.bnet.mats_mut());
        v.extend(self.vnet.mats_mut());
        v
    }
}
