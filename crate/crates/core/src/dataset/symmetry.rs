//! Axis-permutation symmetry of the design parameterization: the response
//! along `e_i` of `Theta` equals the response along `e_pi(i)` of the
//! permuted `Theta`.

use alloc::vec::Vec;

use super::{DesignParams, Direction, MorphologyClass, Result, Sample};

/// `PERMS[p][j]` is the source axis that lands on axis `j`.
const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn apply(sample: &Sample, perm: &[usize; 3]) -> Result<Sample> {
    let t = sample.theta.angles();
    let theta = DesignParams::new([t[perm[0]], t[perm[1]], t[perm[2]]])?;
    let d = sample.direction.index();
    let new_dir = perm.iter().position(|&src| src == d).expect("permutation");
    Ok(Sample {
        theta,
        direction: Direction::from_index(new_dir),
        curve: sample.curve.clone(),
        provenance: sample.provenance,
    })
}

/// All equivalent `(Theta', direction')` parameterizations of a sample.
///
/// Lamellar designs give the three placements of the non-zero angle (the two
/// zeros are interchangeable); columnar and cubic designs give all six axis
/// permutations, duplicates included.
pub fn expand_permutations(sample: &Sample) -> Result<Vec<Sample>> {
    let class = sample.class()?;
    let angles = sample.theta.angles();
    let mut out = Vec::with_capacity(6);
    for perm in &PERMS {
        if class == MorphologyClass::Lamellar {
            // keep the zeros in their original relative order
            let zero_sources: Vec<usize> = perm.iter().copied().filter(|&s| angles[s] == 0.0).collect();
            if zero_sources.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
        }
        out.push(apply(sample, perm)?);
    }
    Ok(out)
}

/// The images of a sample whose angles are in ascending order, one per
/// distinct direction. For a canonical design this is the sample itself plus
/// the directions related to it by ties among the angles (for lamellar
/// designs, `e1` and `e2` are interchangeable).
pub fn canonical_equivalents(sample: &Sample) -> Result<Vec<Sample>> {
    let canonical = sample.theta.canonical().angles();
    let mut out: Vec<Sample> = Vec::with_capacity(3);
    for perm in &PERMS {
        let img = apply(sample, perm)?;
        if img.theta.angles() == canonical && !out.iter().any(|s| s.direction == img.direction) {
            out.push(img);
        }
    }
    out.sort_by_key(|s| s.direction);
    Ok(out)
}

/// The canonical (ascending) form of `theta` and the axis that `direction`
/// lands on after sorting. Ties keep their index order.
pub fn canonical_direction(theta: &DesignParams, direction: Direction) -> (DesignParams, Direction) {
    let t = theta.angles();
    let mut order = [0usize, 1, 2];
    // stable insertion sort on the angles
    for i in 1..3 {
        let mut j = i;
        while j > 0 && t[order[j - 1]] > t[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let new_dir = order.iter().position(|&src| src == direction.index()).expect("permutation");
    (theta.canonical(), Direction::from_index(new_dir))
}
