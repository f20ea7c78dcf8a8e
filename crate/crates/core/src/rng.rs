//! Reproducible randomness.
//!
//! Every random stream is a ChaCha8 keystream (a counter-based generator:
//! output block `n` depends only on key and counter). The key comes from the
//! run seed and the 64-bit stream id selects an independent substream, so
//! per-subsystem and per-start generators never overlap and give the same
//! numbers on every platform.
//!
//! Stream ids used across the crate:
//!
//! | stream              | purpose                                   |
//! |---------------------|-------------------------------------------|
//! | `NOISE`             | Gaussian noise for phase fields           |
//! | `TEACHER + k`       | teacher weights, `k = 3 * dir + class`    |
//! | `TEACHER_THETA`     | teacher design sampling                   |
//! | `TEACHER_NOISE`     | multiplicative measurement noise          |
//! | `SPLIT`             | train/test split shuffle                  |
//! | `INIT + dir`        | student weight initialization             |
//! | `BATCH + dir`       | minibatch order                           |
//! | `DESIGN + start`    | inverse-design start sampling             |

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub mod stream {
    pub const NOISE: u64 = 1;
    pub const TEACHER: u64 = 0x100;
    pub const TEACHER_THETA: u64 = 0x200;
    pub const TEACHER_NOISE: u64 = 0x201;
    pub const SPLIT: u64 = 0x300;
    pub const INIT: u64 = 0x400;
    pub const BATCH: u64 = 0x500;
    pub const DESIGN: u64 = 1 << 32;
}

/// Seeded generator with uniform and standard-normal draws.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via the Box–Muller transform; draws come in pairs.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = crate::math::sqrt(-2.0 * crate::math::ln(u1));
        let angle = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * crate::math::sin(angle));
        r * crate::math::cos(angle)
    }

    /// Index in `0..n`. Modulo bias is below 2^-40 for the sizes used here.
    pub fn below(&mut self, n: usize) -> usize {
        (self.inner.next_u64() % n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
