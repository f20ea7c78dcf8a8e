//! Numerical core for anisotropic spinodoid metamaterials.
//!
//! The crate is `no_std` (with `alloc`) and covers the whole pipeline that
//! does not touch the file system:
//!
//! * [`field`]: spectral phase-field synthesis, solidification, isosurface
//!   extraction and geometric descriptors.
//! * [`diffkit`]: a matrix-valued reverse-mode tape with a forward tangent
//!   channel in the strain input, used for second-order training gradients.
//! * [`picnn`]: partially input-convex networks, the two corrected energy
//!   wells, their entropy-relaxed combination and the resulting stress.
//! * [`dataset`], [`train`], [`design`]: curve preprocessing, training of the
//!   per-direction submodules and multi-start inverse design.
//!
//! FFTs, threads and IO are injected by the `spinodal` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod design;
pub mod diffkit;
pub mod field;
pub mod math;
pub mod picnn;
pub mod rng;
pub mod train;

pub use dataset::{Curve, DesignParams, Direction, MorphologyClass, Sample};
pub use diffkit::{Gradients, Mat, Tape, Var};
pub use field::{GridField, SpectralParams, SurfaceMesh};
pub use picnn::{EnergyModel, PicnnWeights};
