use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{mape_loss, ModelRegistry, Result, TrainError};
use crate::dataset::{absorbed_energy, incremental_stiffness, interpolate_curve, Direction, MorphologyClass, Sample};

/// `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(TrainError::LengthMismatch(pred.len(), target.len()));
    }
    if target.len() < 2 {
        return Err(TrainError::DegenerateVariance);
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(TrainError::DegenerateVariance);
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapeEntry {
    pub direction: Direction,
    pub class: MorphologyClass,
    pub mape: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2_stress: f64,
    pub r2_energy: f64,
    pub r2_stiffness: f64,
    pub mape: f64,
    pub mape_by_group: Vec<MapeEntry>,
    pub n_samples: usize,
}

/// Predicted curves for the test samples on the registry's strain grid.
pub fn predict_test_set(registry: &ModelRegistry, test: &[Sample]) -> Result<(Vec<Sample>, Vec<Vec<f64>>)> {
    let grid = registry.norm.grid;
    let on_grid: Vec<Sample> = test
        .iter()
        .map(|s| Ok(Sample { curve: interpolate_curve(&s.curve, &grid)?, ..s.clone() }))
        .collect::<Result<_>>()?;
    let items: Vec<_> = on_grid.iter().map(|s| (s.theta, s.direction)).collect();
    let preds = registry.predict_many(&items, &grid.points())?;
    Ok((on_grid, preds.into_iter().map(|c| c.stress().to_vec()).collect()))
}

/// R^2 of stress, absorbed energy and incremental stiffness pooled over all
/// strain points of all test samples, plus MAPE by direction and class.
pub fn evaluate_metrics(registry: &ModelRegistry, test: &[Sample]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(TrainError::Empty);
    }
    let (on_grid, preds) = predict_test_set(registry, test)?;
    let (mut ps, mut ts) = (Vec::new(), Vec::new());
    let (mut pe, mut te) = (Vec::new(), Vec::new());
    let (mut pk, mut tk) = (Vec::new(), Vec::new());
    let mut groups: Vec<(Direction, MorphologyClass, f64, usize)> = Vec::new();
    let mut total_mape = 0.0;
    for (s, p) in on_grid.iter().zip(&preds) {
        let pc = crate::dataset::Curve::new(s.curve.strain().to_vec(), p.clone())?;
        ps.extend_from_slice(p);
        ts.extend_from_slice(s.curve.stress());
        pe.extend(absorbed_energy(&pc));
        te.extend(absorbed_energy(&s.curve));
        pk.extend(incremental_stiffness(&pc)?);
        tk.extend(incremental_stiffness(&s.curve)?);
        let m = mape_loss(p, s.curve.stress())?;
        total_mape += m;
        let (d, c) = (s.direction, s.class()?);
        match groups.iter_mut().find(|g| g.0 == d && g.1 == c) {
            Some(g) => {
                g.2 += m;
                g.3 += 1;
            }
            None => groups.push((d, c, m, 1)),
        }
    }
    groups.sort_by_key(|g| (g.0, g.1));
    Ok(Metrics {
        r2_stress: r_squared(&ps, &ts)?,
        r2_energy: r_squared(&pe, &te)?,
        r2_stiffness: r_squared(&pk, &tk)?,
        mape: total_mape / on_grid.len() as f64,
        mape_by_group: groups
            .into_iter()
            .map(|(direction, class, sum, count)| MapeEntry { direction, class, mape: sum / count as f64, count })
            .collect(),
        n_samples: on_grid.len(),
    })
}
