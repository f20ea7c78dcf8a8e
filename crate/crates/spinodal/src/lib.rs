//! File formats, parallel backends and the command pipeline on top of
//! `spinodal-core`.
//!
//! The core crate is `no_std`; this crate supplies the pieces it leaves
//! open: a `rustfft` implementation of [`Dft`](spinodal_core::field::Dft), a
//! rayon [`StartRunner`](spinodal_core::design::StartRunner), and readers and
//! writers for every on-disk artifact.

pub mod backend;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use backend::{thread_pool, RayonRunner, RustFft};
pub use config::RunConfig;
pub use error::{Error, Result};
