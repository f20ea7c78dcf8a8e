use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::diffkit::Mat;
use crate::math;
use crate::rng::Rng;

/// Ordered view over the trainable matrices of a network. Binding to a tape,
/// optimizer state and gradient extraction all use this order.
pub trait Params {
    fn mats(&self) -> Vec<&Mat>;
    fn mats_mut(&mut self) -> Vec<&mut Mat>;

    fn param_count(&self) -> usize {
        self.mats().iter().map(|m| m.len()).sum()
    }
}

/// Skip connection from the strain input into layer `k >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipWeights {
    pub a_yy: Mat,
    pub b_yy: Mat,
    pub a_yu: Mat,
    pub b_yu: Mat,
}

/// One layer of the convex path plus the design-path layer feeding the next.
///
/// `a_zz` is stored raw; it enters the network through softplus, so the
/// effective weights on the convex path are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicnnLayer {
    pub alpha: f64,
    pub a_zz: Mat,
    pub a_zu: Mat,
    pub b_zu: Mat,
    /// Absent on the output layer, where the design term is zero.
    pub a_u: Option<Mat>,
    pub b_u: Option<Mat>,
    /// Absent on the first layer.
    pub skip: Option<SkipWeights>,
    /// Design-path weights producing the next layer's design features;
    /// absent on the output layer.
    pub a_uu: Option<Mat>,
    pub b_uu: Option<Mat>,
}

/// Partially input-convex network: convex in the scalar strain input,
/// unconstrained in the design input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicnnWeights {
    pub design_dim: usize,
    pub hidden: Vec<usize>,
    pub layers: Vec<PicnnLayer>,
}

fn uniform_mat(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.uniform_in(-bound, bound))
}

fn fan_in_mat(rng: &mut Rng, rows: usize, cols: usize) -> Mat {
    uniform_mat(rng, rows, cols, 1.0 / math::sqrt(cols as f64))
}

/// Raw convex-path weights whose softplus is uniform in `(0.05, 1) * gain / fan_in`.
fn convex_mat(rng: &mut Rng, rows: usize, cols: usize, gain: f64) -> Mat {
    let hi = gain / cols as f64;
    Mat::from_fn(rows, cols, |_, _| {
        let target = rng.uniform_in(0.05 * hi, hi);
        // inverse softplus
        math::ln(libm::expm1(target))
    })
}

impl PicnnWeights {
    fn shaped(design_dim: usize, hidden: &[usize], mut fill: impl FnMut(usize, usize, Role) -> Mat) -> Self {
        let n_layers = hidden.len() + 1;
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let out = if k < hidden.len() { hidden[k] } else { 1 };
            let z_in = if k == 0 { 1 } else { hidden[k - 1] };
            let u_in = if k == 0 { design_dim } else { hidden[k - 1] };
            let last = k + 1 == n_layers;
            layers.push(PicnnLayer {
                alpha: 1.0 / out as f64,
                a_zz: fill(out, z_in, if last { Role::OutConvex } else { Role::Convex }),
                a_zu: fill(z_in, u_in, Role::DesignWeight),
                b_zu: fill(z_in, 1, Role::GateBias),
                a_u: (!last).then(|| fill(out, u_in, Role::DesignWeight)),
                b_u: (!last).then(|| fill(out, 1, Role::PreBias)),
                skip: (k > 0).then(|| SkipWeights {
                    a_yy: fill(out, 1, Role::Weight),
                    b_yy: fill(out, 1, if last { Role::OutBias } else { Role::PreBias }),
                    a_yu: fill(1, u_in, Role::DesignWeight),
                    b_yu: fill(1, 1, Role::Bias),
                }),
                a_uu: (!last).then(|| fill(out, u_in, Role::Weight)),
                b_uu: (!last).then(|| fill(out, 1, Role::Bias)),
            });
        }
        Self { design_dim, hidden: hidden.to_vec(), layers }
    }

    /// All weights zero (convex-path raw weights included).
    pub fn zeros(design_dim: usize, hidden: &[usize]) -> Self {
        Self::shaped(design_dim, hidden, |r, c, _| Mat::zeros(r, c))
    }

    /// Fan-in uniform initialization. Convex-path weights start small and
    /// positive after softplus, gate biases start positive, and hidden
    /// pre-activation biases sit where `d * softplus(x)^2 = 1`, which keeps
    /// the stacked squared-softplus layers from blowing up.
    pub fn init(design_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        Self::shaped(design_dim, hidden, |r, c, role| match role {
            Role::Convex => convex_mat(rng, r, c, CONVEX_GAIN),
            Role::OutConvex => convex_mat(rng, r, c, OUTPUT_GAIN),
            Role::OutBias => Mat::from_fn(r, c, |_, _| OUTPUT_BIAS + rng.uniform_in(-0.1, 0.1)),
            Role::Weight => fan_in_mat(rng, r, c),
            Role::DesignWeight => uniform_mat(rng, r, c, DESIGN_GAIN / math::sqrt(c as f64)),
            Role::GateBias => Mat::from_fn(r, c, |_, _| rng.uniform_in(0.5, 1.0)),
            Role::PreBias => {
                // d * softplus(x)^2 = 1 at x = softplus^-1(1 / sqrt(d))
                let centre = math::ln(libm::expm1(1.0 / math::sqrt(r as f64)));
                Mat::from_fn(r, c, |_, _| centre + rng.uniform_in(-0.1, 0.1))
            }
            Role::Bias => uniform_mat(rng, r, c, 0.1),
        })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.design_dim == other.design_dim
            && self.hidden == other.hidden
            && self.mats().iter().zip(other.mats()).all(|(a, b)| a.shape() == b.shape())
    }
}

const CONVEX_GAIN: f64 = 1.0;
const OUTPUT_GAIN: f64 = 4.0;
const OUTPUT_BIAS: f64 = 2.0;
const DESIGN_GAIN: f64 = 0.5;

#[derive(Clone, Copy)]
enum Role {
    Convex,
    Weight,
    OutConvex,
    DesignWeight,
    OutBias,
    GateBias,
    PreBias,
    Bias,
}

impl Params for PicnnWeights {
    fn mats(&self) -> Vec<&Mat> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend([&l.a_zz, &l.a_zu, &l.b_zu]);
            v.extend(l.a_u.iter().chain(l.b_u.iter()));
            if let Some(s) = &l.skip {
                v.extend([&s.a_yy, &s.b_yy, &s.a_yu, &s.b_yu]);
            }
            v.extend(l.a_uu.iter().chain(l.b_uu.iter()));
        }
        v
    }

    fn mats_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = Vec::new();
        for l in &mut self.layers {
            v.push(&mut l.a_zz);
            v.push(&mut l.a_zu);
            v.push(&mut l.b_zu);
            v.extend(l.a_u.iter_mut().chain(l.b_u.iter_mut()));
            if let Some(s) = &mut l.skip {
                v.extend([&mut s.a_yy, &mut s.b_yy, &mut s.a_yu, &mut s.b_yu]);
            }
            v.extend(l.a_uu.iter_mut().chain(l.b_uu.iter_mut()));
        }
        v
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Mat,
}

/// Multilayer perceptron with softplus activations everywhere, including
/// the output, so its value is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetNetWeights {
    pub layers: Vec<DenseLayer>,
}

pub const OFFSET_NET_HIDDEN: [usize; 2] = [16, 16];

impl OffsetNetWeights {
    /// `3 -> hidden -> 1`; the output bias sets the initial offset to about
    /// `softplus(output_bias)`.
    pub fn init(hidden: &[usize], output_bias: f64, rng: &mut Rng) -> Self {
        let mut dims = vec![3];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let last = i + 2 == dims.len();
                DenseLayer {
                    w: fan_in_mat(rng, w[1], w[0]),
                    b: if last { Mat::filled(1, 1, output_bias) } else { uniform_mat(rng, w[1], 1, 0.1) },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(hidden: &[usize]) -> Self {
        let mut dims = vec![3];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims.windows(2).map(|w| DenseLayer { w: Mat::zeros(w[1], w[0]), b: Mat::zeros(w[1], 1) }).collect();
        Self { layers }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.mats().iter().zip(other.mats()).all(|(a, b)| a.shape() == b.shape())
    }
}

impl Params for OffsetNetWeights {
    fn mats(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn mats_mut(&mut self) -> Vec<&mut Mat> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }
}
