use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use spinodal_core::design::{self, StartRunner, StartSpec, StartTrace};
use spinodal_core::field::Dft;

use crate::error::{Error, Result};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "SPNF_THREADS";

/// Mixed-radix FFT from `rustfft`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RustFft;

impl Dft for RustFft {
    fn transform(&self, data: &mut [Complex64], len: usize, inverse: bool) {
        let mut planner = FftPlanner::new();
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        fft.process(data);
    }
}

/// Runs design starts on the current rayon pool; output order matches input.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonRunner;

impl StartRunner for RayonRunner {
    fn run(
        &self,
        specs: &[StartSpec],
        job: &(dyn Fn(&StartSpec) -> design::Result<StartTrace> + Sync),
    ) -> Vec<design::Result<StartTrace>> {
        specs.par_iter().map(job).collect()
    }
}

/// Thread count from the flag, then the config file, then `SPNF_THREADS`;
/// `None` leaves the choice to rayon.
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag.or(config) {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::usage(format!("{THREADS_ENV} must be a non-negative integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

/// Local pool with `threads` workers (0 or `None` means rayon's default).
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build().map_err(Error::internal)
}
