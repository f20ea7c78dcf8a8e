//! Tape construction for batched energy evaluation.
//!
//! Columns are strain points. Design-dependent quantities are computed once
//! per design group and gathered onto the point columns, so one tape covers a
//! whole minibatch of curves for one morphology class.

use alloc::vec::Vec;

use super::weights::{OffsetNetWeights, PicnnWeights};
use crate::diffkit::{Mat, Result, Tape, Var, ZERO_COL};

struct LayerVars {
    inv_alpha: f64,
    zz: Var,
    a_zu: Var,
    b_zu: Var,
    design: Option<(Var, Var)>,
    skip: Option<[Var; 4]>,
    next_u: Option<(Var, Var)>,
}

/// A [`PicnnWeights`] bound to tape leaves.
pub struct PicnnVars {
    layers: Vec<LayerVars>,
}

/// An [`OffsetNetWeights`] bound to tape leaves.
pub struct OffsetNetVars {
    layers: Vec<(Var, Var)>,
}

fn pair(tape: &mut Tape, leaves: &mut Vec<Var>, a: &Option<Mat>, b: &Option<Mat>) -> Option<(Var, Var)> {
    match (a, b) {
        (Some(a), Some(b)) => {
            let a = tape.leaf(a.clone());
            let b = tape.leaf(b.clone());
            leaves.extend([a, b]);
            Some((a, b))
        }
        _ => None,
    }
}

impl PicnnVars {
    /// Push one leaf per weight matrix, in [`super::Params::mats`] order,
    /// appending the handles to `leaves`.
    pub fn bind(tape: &mut Tape, w: &PicnnWeights, leaves: &mut Vec<Var>) -> Result<Self> {
        let mut layers = Vec::with_capacity(w.layers.len());
        for l in &w.layers {
            let raw_zz = tape.leaf(l.a_zz.clone());
            let a_zu = tape.leaf(l.a_zu.clone());
            let b_zu = tape.leaf(l.b_zu.clone());
            leaves.extend([raw_zz, a_zu, b_zu]);
            let design = pair(tape, leaves, &l.a_u, &l.b_u);
            let skip = l.skip.as_ref().map(|s| {
                let v = [
                    tape.leaf(s.a_yy.clone()),
                    tape.leaf(s.b_yy.clone()),
                    tape.leaf(s.a_yu.clone()),
                    tape.leaf(s.b_yu.clone()),
                ];
                leaves.extend(v);
                v
            });
            let next_u = pair(tape, leaves, &l.a_uu, &l.b_uu);
            let zz = tape.softplus(raw_zz)?;
            layers.push(LayerVars { inv_alpha: 1.0 / l.alpha, zz, a_zu, b_zu, design, skip, next_u });
        }
        Ok(Self { layers })
    }

    /// `u0` is `design_dim x G` (one column per design group), `z0` is
    /// `1 x C`, and `cols[j]` names the group of column `j`. Returns `1 x C`.
    pub fn forward(&self, tape: &mut Tape, u0: Var, z0: Var, cols: &[u32]) -> Result<Var> {
        let mut u = u0;
        let mut z = z0;
        for l in &self.layers {
            let gate = affine(tape, l.a_zu, u, l.b_zu)?;
            let gate = tape.relu(gate)?;
            let gate = tape.gather_cols(gate, cols)?;
            let gz = tape.mul(z, gate)?;
            let mut pre = tape.matmul(l.zz, gz)?;
            if let Some([a_yy, b_yy, a_yu, b_yu]) = l.skip {
                let y = affine(tape, a_yu, u, b_yu)?;
                let y = tape.gather_cols(y, cols)?;
                let y = tape.mul(z0, y)?;
                let y = tape.matmul(a_yy, y)?;
                let y = tape.add(y, b_yy)?;
                pre = tape.add(pre, y)?;
            }
            if let Some((a_u, b_u)) = l.design {
                let d = affine(tape, a_u, u, b_u)?;
                let d = tape.gather_cols(d, cols)?;
                pre = tape.add(pre, d)?;
            }
            let s = tape.softplus(pre)?;
            let s = tape.square(s)?;
            z = tape.scale(s, l.inv_alpha)?;
            if let Some((a_uu, b_uu)) = l.next_u {
                let n = affine(tape, a_uu, u, b_uu)?;
                u = tape.relu(n)?;
            }
        }
        Ok(z)
    }
}

impl OffsetNetVars {
    pub fn bind(tape: &mut Tape, w: &OffsetNetWeights, leaves: &mut Vec<Var>) -> Self {
        let layers = w
            .layers
            .iter()
            .map(|l| {
                let a = tape.leaf(l.w.clone());
                let b = tape.leaf(l.b.clone());
                leaves.extend([a, b]);
                (a, b)
            })
            .collect();
        Self { layers }
    }

    /// `x` is `3 x G`; returns `1 x G`, strictly positive.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for &(w, b) in &self.layers {
            let a = affine(tape, w, h, b)?;
            h = tape.softplus(a)?;
        }
        Ok(h)
    }
}

fn affine(tape: &mut Tape, a: Var, x: Var, b: Var) -> Result<Var> {
    let ax = tape.matmul(a, x)?;
    tape.add(ax, b)
}

/// Nodes produced by [`energy_batch`]. Point quantities are `1 x N` with the
/// groups laid out consecutively; `b` and `v` are `1 x G`.
pub struct EnergyNodes {
    pub w1: Var,
    pub w2: Var,
    pub w: Var,
    pub sigma: Var,
    pub b: Var,
    pub v: Var,
}

/// Networks of one (direction, class) model bound to a tape.
pub struct BoundModel<'a> {
    pub picnn1: &'a PicnnVars,
    pub picnn2: &'a PicnnVars,
    pub bnet: &'a OffsetNetVars,
    pub vnet: &'a OffsetNetVars,
    pub active_angles: usize,
    pub k_t: f64,
}

fn iota(start: usize, n: usize) -> impl Iterator<Item = u32> {
    (start..start + n).map(|i| i as u32)
}

/// Corrected potentials, relaxed energy and stress for every strain point of
/// every group. `theta` is `3 x G` (normalized, canonical, zero-padded);
/// `strains[g]` are the normalized strains of group `g`.
pub fn energy_batch(tape: &mut Tape, m: &BoundModel<'_>, theta: Var, strains: &[&[f64]]) -> Result<EnergyNodes> {
    let g_count = strains.len();
    let n: usize = strains.iter().map(|s| s.len()).sum();
    let group: Vec<u32> = strains.iter().enumerate().flat_map(|(g, s)| core::iter::repeat_n(g as u32, s.len())).collect();
    let eps: Vec<f64> = strains.iter().flat_map(|s| s.iter().copied()).collect();

    let b = m.bnet.forward(tape, theta)?;
    let v = m.vnet.forward(tape, theta)?;
    let u0 = tape.rows(theta, 3 - m.active_angles, m.active_angles)?;

    // picnn1 columns: data | zero strain per group | strain b per group
    let cols1: Vec<u32> = group.iter().copied().chain(iota(0, g_count)).chain(iota(0, g_count)).collect();
    let c1 = cols1.len();
    let mut z_val = eps.clone();
    z_val.resize(c1, 0.0);
    let seed: Vec<f64> = (0..c1).map(|j| if j < n + g_count { 1.0 } else { 0.0 }).collect();
    let z0 = tape.seeded_leaf(Mat::row(z_val), Mat::row(seed))?;
    let b_idx: Vec<u32> = core::iter::repeat_n(ZERO_COL, n + g_count).chain(iota(0, g_count)).collect();
    let b_cols = tape.gather_cols(b, &b_idx)?;
    let z0 = tape.add(z0, b_cols)?;
    let p1 = m.picnn1.forward(tape, u0, z0, &cols1)?;
    let dp1 = tape.tangent_of(p1)?;

    let data: Vec<u32> = iota(0, n).collect();
    let zero_of_point: Vec<u32> = group.iter().map(|&g| n as u32 + g).collect();
    let zero: Vec<u32> = iota(n, g_count).collect();
    let at_b: Vec<u32> = iota(n + g_count, g_count).collect();

    let p1_d = tape.gather_cols(p1, &data)?;
    let p1_0 = tape.gather_cols(p1, &zero_of_point)?;
    let p1_0 = tape.drop_tangent(p1_0)?;
    let dp1_0 = tape.gather_cols(dp1, &zero_of_point)?;
    let eps_d = tape.gather_cols(z0, &data)?;
    let lin = tape.mul(eps_d, dp1_0)?;
    let w1 = tape.sub(p1_d, p1_0)?;
    let w1 = tape.sub(w1, lin)?;

    // W1(b) per group, constant in strain
    let pb = tape.gather_cols(p1, &at_b)?;
    let pz = tape.gather_cols(p1, &zero)?;
    let dpz = tape.gather_cols(dp1, &zero)?;
    let lin_b = tape.mul(b, dpz)?;
    let w1_b = tape.sub(pb, pz)?;
    let w1_b = tape.sub(w1_b, lin_b)?;
    let w1_b = tape.drop_tangent(w1_b)?;

    // picnn2 columns: data | zero shifted strain per group
    let cols2: Vec<u32> = group.iter().copied().chain(iota(0, g_count)).collect();
    let c2 = cols2.len();
    let mut z_val = eps;
    z_val.resize(c2, 0.0);
    let y0 = tape.seeded_leaf(Mat::row(z_val), Mat::filled(1, c2, 1.0))?;
    let shift_idx: Vec<u32> = group.iter().copied().chain(core::iter::repeat_n(ZERO_COL, g_count)).collect();
    let shift = tape.gather_cols(b, &shift_idx)?;
    let y0 = tape.sub(y0, shift)?;
    let p2 = m.picnn2.forward(tape, u0, y0, &cols2)?;
    let dp2 = tape.tangent_of(p2)?;

    let p2_d = tape.gather_cols(p2, &data)?;
    let p2_0 = tape.gather_cols(p2, &zero_of_point)?;
    let p2_0 = tape.drop_tangent(p2_0)?;
    let dp2_0 = tape.gather_cols(dp2, &zero_of_point)?;
    let y_d = tape.gather_cols(y0, &data)?;
    let lin2 = tape.mul(y_d, dp2_0)?;
    let v_d = tape.gather_cols(v, &group)?;
    let w1b_d = tape.gather_cols(w1_b, &group)?;
    let w2 = tape.sub(p2_d, p2_0)?;
    let w2 = tape.add(w2, v_d)?;
    let w2 = tape.add(w2, w1b_d)?;
    let w2 = tape.sub(w2, lin2)?;

    let w = tape.softmin(w1, w2, m.k_t)?;
    let sigma = tape.tangent_of(w)?;
    Ok(EnergyNodes { w1, w2, w, sigma, b, v })
}
