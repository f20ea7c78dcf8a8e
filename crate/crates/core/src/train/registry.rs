use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::dataset::{canonical_direction, Curve, DesignParams, Direction, MorphologyClass, NormalizationConfig};
use crate::picnn::Submodule;

pub const REGISTRY_SCHEMA_VERSION: u32 = 1;

/// Trained submodules for all three directions plus the scales they were
/// trained in. Fully populated it holds 18 PICNNs and 6 offset nets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegistry {
    /// Indexed by [`Direction::index`].
    pub submodules: Vec<Submodule>,
    pub norm: NormalizationConfig,
}

impl ModelRegistry {
    pub fn new(submodules: Vec<Submodule>, norm: NormalizationConfig) -> Result<Self> {
        for d in Direction::ALL {
            match submodules.get(d.index()) {
                Some(s) if s.direction == d && s.pairs.len() == 3 => {}
                _ => return Err(TrainError::Untrained(d)),
            }
        }
        norm.validate()?;
        Ok(Self { submodules, norm })
    }

    pub fn submodule(&self, d: Direction) -> &Submodule {
        &self.submodules[d.index()]
    }

    pub fn picnn_count(&self) -> usize {
        self.submodules.iter().map(|s| 2 * s.pairs.len()).sum()
    }

    pub fn offset_net_count(&self) -> usize {
        2 * self.submodules.len()
    }

    /// Raw stress along `direction` for any (not necessarily sorted) design
    /// at raw strains.
    pub fn predict(&self, theta: &DesignParams, direction: Direction, strains: &[f64]) -> Result<Curve> {
        Ok(self.predict_many(&[(*theta, direction)], strains)?.remove(0))
    }

    /// Batched [`Self::predict`]; one tape per (direction, class) present.
    pub fn predict_many(&self, items: &[(DesignParams, Direction)], strains: &[f64]) -> Result<Vec<Curve>> {
        let canon: Vec<(DesignParams, Direction, MorphologyClass)> = items
            .iter()
            .map(|(t, d)| {
                let (c, d) = canonical_direction(t, *d);
                Ok((c, d, c.class()?))
            })
            .collect::<Result<_>>()?;
        let scaled: Vec<f64> = strains.iter().map(|e| e / self.norm.max_strain).collect();
        let mut out: Vec<Option<Curve>> = items.iter().map(|_| None).collect();
        for d in Direction::ALL {
            for class in MorphologyClass::ALL {
                let idx: Vec<usize> = (0..canon.len()).filter(|&i| canon[i].1 == d && canon[i].2 == class).collect();
                if idx.is_empty() {
                    continue;
                }
                let thetas: Vec<[f64; 3]> = idx.iter().map(|&i| canon[i].0.normalized(self.norm.theta_max)).collect();
                let groups: Vec<&[f64]> = idx.iter().map(|_| scaled.as_slice()).collect();
                let evals = self.submodule(d).view(class).evaluate_batch(&thetas, &groups)?;
                for (&i, e) in idx.iter().zip(evals) {
                    let stress = e.sigma.iter().map(|s| s * self.norm.max_stress).collect();
                    out[i] = Some(Curve::new(strains.to_vec(), stress)?);
                }
            }
        }
        Ok(out.into_iter().map(|c| c.expect("every item evaluated")).collect())
    }
}
