use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// One-dimensional discrete Fourier transform over contiguous lines.
pub trait Dft {
    /// Transform every consecutive run of `len` values of `data` in place.
    /// Unnormalized in both directions; the forward kernel is `exp(-2 pi i jk / n)`.
    fn transform(&self, data: &mut [Complex64], len: usize, inverse: bool);
}

/// Direct `O(n^2)` evaluation with a twiddle table.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveDft;

impl Dft for NaiveDft {
    fn transform(&self, data: &mut [Complex64], len: usize, inverse: bool) {
        let sign = if inverse { 1.0 } else { -1.0 };
        let twiddle: Vec<Complex64> = (0..len)
            .map(|j| {
                let a = sign * 2.0 * core::f64::consts::PI * j as f64 / len as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for line in data.chunks_exact_mut(len) {
            for (k, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut idx = 0;
                for x in line.iter() {
                    acc += x * twiddle[idx];
                    idx += k;
                    if idx >= len {
                        idx -= len;
                    }
                }
                *o = acc;
            }
            line.copy_from_slice(&out);
        }
    }
}

/// Separable 3D transform of a row-major `n^3` array.
pub fn fft3(dft: &dyn Dft, data: &mut [Complex64], n: usize, inverse: bool) {
    dft.transform(data, n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
    for stride in [n, n * n] {
        let bases = line_bases(n, stride);
        for (l, &b) in bases.iter().enumerate() {
            for t in 0..n {
                scratch[l * n + t] = data[b + t * stride];
            }
        }
        dft.transform(&mut scratch, n, inverse);
        for (l, &b) in bases.iter().enumerate() {
            for t in 0..n {
                data[b + t * stride] = scratch[l * n + t];
            }
        }
    }
}

/// Start offsets of every line along the axis with the given stride.
fn line_bases(n: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n * n);
    if stride == n {
        for i in 0..n {
            for k in 0..n {
                out.push(i * n * n + k);
            }
        }
    } else {
        for j in 0..n {
            for k in 0..n {
                out.push(j * n + k);
            }
        }
    }
    out
}
