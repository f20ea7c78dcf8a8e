use alloc::vec::Vec;

use super::{Curve, DatasetError, Result, StrainGrid};

/// Piecewise-linear resampling onto the fixed strain grid.
///
/// A curve starting after the first grid strain is extended backwards along
/// its first segment; a curve ending before the last grid strain is rejected.
pub fn interpolate_curve(raw: &Curve, grid: &StrainGrid) -> Result<Curve> {
    let (xs, ys) = (raw.strain(), raw.stress());
    if xs.len() < 2 {
        return Err(DatasetError::TooFewPoints(2));
    }
    let last = *xs.last().expect("non-empty");
    if last < grid.last - 1e-12 {
        return Err(DatasetError::InsufficientStrainRange(last, grid.last));
    }
    let points = grid.points();
    let mut stress = Vec::with_capacity(points.len());
    let mut seg = 0;
    for &x in &points {
        while seg + 2 < xs.len() && xs[seg + 1] < x {
            seg += 1;
        }
        let (x0, x1, y0, y1) = (xs[seg], xs[seg + 1], ys[seg], ys[seg + 1]);
        let y = if x == x0 {
            y0
        } else if x == x1 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        stress.push(y);
    }
    Curve::new(points, stress)
}

/// Cumulative trapezoidal area with a virtual origin `(0, 0)` before the
/// first point.
pub fn absorbed_energy(curve: &Curve) -> Vec<f64> {
    let mut out = Vec::with_capacity(curve.len());
    let (mut e_prev, mut s_prev, mut acc) = (0.0, 0.0, 0.0);
    for (&e, &s) in curve.strain().iter().zip(curve.stress()) {
        acc += 0.5 * (s + s_prev) * (e - e_prev);
        out.push(acc);
        e_prev = e;
        s_prev = s;
    }
    out
}

/// Slope per loadstep: central differences inside, a forward difference from
/// the virtual origin at the first point and a backward difference at the
/// last.
pub fn incremental_stiffness(curve: &Curve) -> Result<Vec<f64>> {
    let (e, s) = (curve.strain(), curve.stress());
    let n = e.len();
    if n < 2 {
        return Err(DatasetError::TooFewPoints(2));
    }
    let mut out = Vec::with_capacity(n);
    out.push(s[0] / e[0]);
    for t in 1..n - 1 {
        out.push((s[t + 1] - s[t - 1]) / (e[t + 1] - e[t - 1]));
    }
    out.push((s[n - 1] - s[n - 2]) / (e[n - 1] - e[n - 2]));
    Ok(out)
}
