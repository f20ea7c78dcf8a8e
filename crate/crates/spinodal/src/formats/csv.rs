//! Comma-separated text artifacts.
//!
//! A curve file carries metadata comment lines followed by a
//! `strain,stress` header and one row per point:
//!
//! ```text
//! # theta=2.0000000000000000e1,2.3000000000000000e1,2.8000000000000000e1
//! # direction=1
//! # E_s=3.2000000000000000e9
//! strain,stress
//! 1.0000000000000000e-3,4.1000000000000000e3
//! ```
//!
//! Stress is in pressure units; dividing by `E_s` gives the dimensionless
//! stress used everywhere else. `theta` and `direction` are optional for
//! design targets.

use std::fmt::Write as _;

use spinodal_core::dataset::{Curve, DesignParams, Direction, Provenance, Sample};
use spinodal_core::field::PoleFigure;
use spinodal_core::train::EpochLog;

use super::num;

pub const CURVE_HEADER: &str = "strain,stress";

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub theta: Option<DesignParams>,
    pub direction: Option<Direction>,
    pub e_s: f64,
    pub provenance: Option<Provenance>,
    /// Dimensionless stress.
    pub curve: Curve,
}

impl CurveFile {
    pub fn from_sample(s: &Sample, e_s: f64) -> Self {
        Self {
            theta: Some(s.theta),
            direction: Some(s.direction),
            e_s,
            provenance: Some(s.provenance),
            curve: s.curve.clone(),
        }
    }

    /// `None` unless both design and direction are present.
    pub fn to_sample(&self) -> Option<Sample> {
        Some(Sample {
            theta: self.theta?,
            direction: self.direction?,
            curve: self.curve.clone(),
            provenance: self.provenance.unwrap_or(Provenance::Experimental),
        })
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        if let Some(t) = self.theta {
            let [a, b, c] = t.angles();
            let _ = writeln!(out, "# theta={},{},{}", num(a), num(b), num(c));
        }
        if let Some(d) = self.direction {
            let _ = writeln!(out, "# direction={}", d.number());
        }
        let _ = writeln!(out, "# E_s={}", num(self.e_s));
        if let Some(p) = self.provenance {
            let _ = writeln!(out, "# provenance={}", provenance_name(p));
        }
        out.push_str(CURVE_HEADER);
        out.push('\n');
        for (e, s) in self.curve.strain().iter().zip(self.curve.stress()) {
            let _ = writeln!(out, "{},{}", num(*e), num(s * self.e_s));
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self, String> {
        let mut theta = None;
        let mut direction = None;
        let mut e_s = None;
        let mut provenance = None;
        let mut header = false;
        let (mut strain, mut pressure) = (Vec::new(), Vec::new());
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            let at = |msg: String| format!("line {}: {msg}", no + 1);
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta.split_once('=').ok_or_else(|| at("metadata line without '='".into()))?;
                let value = value.trim();
                match key.trim() {
                    "theta" => theta = Some(parse_theta(value).map_err(at)?),
                    "direction" => direction = Some(parse_direction(value).map_err(at)?),
                    "E_s" => e_s = Some(parse_num(value).map_err(at)?),
                    "provenance" => provenance = Some(parse_provenance(value).map_err(at)?),
                    other => return Err(at(format!("unknown metadata key {other:?}"))),
                }
                continue;
            }
            if !header {
                if line != CURVE_HEADER {
                    return Err(at(format!("expected header {CURVE_HEADER:?}")));
                }
                header = true;
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| at("expected two columns".into()))?;
            strain.push(parse_num(a).map_err(at)?);
            pressure.push(parse_num(b).map_err(at)?);
        }
        if !header {
            return Err(format!("missing header {CURVE_HEADER:?}"));
        }
        let e_s = e_s.ok_or("missing '# E_s=' line")?;
        if !(e_s > 0.0 && e_s.is_finite()) {
            return Err(format!("E_s must be positive, got {e_s}"));
        }
        let curve = Curve::from_pressure(strain, pressure, e_s).map_err(|e| e.to_string())?;
        Ok(Self { theta, direction, e_s, provenance, curve })
    }
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Experimental => "experimental",
        Provenance::Synthetic => "synthetic",
    }
}

fn parse_provenance(s: &str) -> Result<Provenance, String> {
    match s {
        "experimental" => Ok(Provenance::Experimental),
        "synthetic" => Ok(Provenance::Synthetic),
        _ => Err(format!("unknown provenance {s:?}")),
    }
}

pub fn parse_num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

/// Three comma-separated angles in degrees, validated against the bounds.
pub fn parse_theta(s: &str) -> Result<DesignParams, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("theta needs three comma-separated angles, got {s:?}"));
    }
    let mut t = [0.0; 3];
    for (slot, p) in t.iter_mut().zip(parts) {
        *slot = parse_num(p)?;
    }
    DesignParams::new(t).map_err(|e| e.to_string())
}

pub fn parse_direction(s: &str) -> Result<Direction, String> {
    let n: u32 = s.trim().parse().map_err(|_| format!("direction must be 1, 2 or 3, got {s:?}"))?;
    Direction::try_from(n).map_err(|e| e.to_string())
}

/// One row per bin with its polar and azimuth ranges in degrees.
pub fn pole_figure(pf: &PoleFigure) -> String {
    let mut out = String::from("polar_lo_deg,polar_hi_deg,azimuth_lo_deg,azimuth_hi_deg,mass\n");
    for p in 0..pf.n_polar {
        let (plo, phi) = pf.polar_range(p);
        for a in 0..pf.n_azimuth {
            let (alo, ahi) = pf.azimuth_range(a);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(plo.to_degrees()),
                num(phi.to_degrees()),
                num(alo.to_degrees()),
                num(ahi.to_degrees()),
                num(pf.mass[p * pf.n_azimuth + a])
            );
        }
    }
    out
}

pub fn npf(values: &[f64; 3]) -> String {
    let mut out = String::from("direction,npf\n");
    for (d, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", d + 1, num(*v));
    }
    out
}

/// Training log row. `wall_ms` is elapsed time since the start of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub direction: Direction,
    pub log: EpochLog,
    pub wall_ms: u128,
}

pub fn train_log(rows: &[LogRow]) -> String {
    let mut out = String::from("direction,epoch,loss,wall_ms\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.direction.number(), r.log.epoch, num(r.log.loss), r.wall_ms);
    }
    out
}
