//! Least length as a function of prescribed volume.
//!
//! The swept parameter is the target of the first constraint row; any
//! further rows are scaled in proportion, so a sweep moves along the ray of
//! the base targets.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::curves::DiscreteCurve;
use crate::error::{Error, Result};
use crate::optimizer::{minimize_length, OptimizerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Start each target from the previous solution, rescaled. When off,
    /// every target starts from the supplied curve and runs in parallel.
    pub warm_start: bool,
    pub optimizer: OptimizerConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            warm_start: true,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub target_volume: f64,
    /// NaN when the run failed outright.
    pub length: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

fn failed(target: f64) -> SweepPoint {
    SweepPoint {
        target_volume: target,
        length: f64::NAN,
        converged: false,
        iterations: 0,
        residual: f64::NAN,
    }
}

/// `x ↦ √(to/from)·x` about the centroid, which takes every `V_I` from
/// `from`-proportional to `to`-proportional.
fn rescale(curve: &DiscreteCurve, from: f64, to: f64) -> Result<DiscreteCurve> {
    let c = curve.centroid();
    let neg: Vec<f64> = c.iter().map(|x| -x).collect();
    curve
        .translated(&neg)?
        .scaled((to / from).sqrt())?
        .translated(&c)
}

fn run_one(
    start: &DiscreteCurve,
    base: &ConstraintSet,
    base_target: f64,
    target: f64,
    config: &OptimizerConfig,
) -> Result<(SweepPoint, DiscreteCurve)> {
    let cs = base.with_scaled_targets(target / base_target);
    let report = minimize_length(start, &cs, config)?;
    Ok((
        SweepPoint {
            target_volume: target,
            length: report.length,
            converged: report.converged,
            iterations: report.iterations,
            residual: report.relative_length_gradient_residual,
        },
        report.final_curve,
    ))
}

pub fn sweep_profile(
    start: &DiscreteCurve,
    base: &ConstraintSet,
    targets: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    base.validate(start.dim())?;
    config.optimizer.validate()?;
    if targets.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("sweep targets must be positive"));
    }
    if targets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sweep targets must be sorted ascending"));
    }
    let base_target = base.targets()[0];
    if base_target.is_nan() || base_target <= 0.0 {
        return Err(Error::invalid(
            "the first constraint's base target must be positive",
        ));
    }
    let start_volume = base.values(start)[0];
    if start_volume.is_nan() || start_volume <= 0.0 {
        return Err(Error::invalid(
            "the start curve must enclose positive volume for the first constraint",
        ));
    }

    if !config.warm_start {
        return Ok(targets
            .par_iter()
            .map(|&t| {
                rescale(start, start_volume, t)
                    .and_then(|c| run_one(&c, base, base_target, t, &config.optimizer))
                    .map(|(p, _)| p)
                    .unwrap_or_else(|_| failed(t))
            })
            .collect());
    }

    let mut current = start.clone();
    let mut current_volume = start_volume;
    let mut points = Vec::with_capacity(targets.len());
    for &t in targets {
        let outcome = rescale(&current, current_volume, t)
            .and_then(|c| run_one(&c, base, base_target, t, &config.optimizer));
        match outcome {
            Ok((p, curve)) => {
                let v = base.values(&curve)[0];
                if v > 0.0 {
                    current = curve;
                    current_volume = v;
                }
                points.push(p);
            }
            Err(_) => points.push(failed(t)),
        }
    }
    Ok(points)
}

/// CSV with header `target_volume,length,converged,iterations,residual`,
/// written even when there are no rows.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Numerical(format!("sweep write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "target_volume",
        "length",
        "converged",
        "iterations",
        "residual",
    ])
    .map_err(io)?;
    for p in points {
        w.write_record([
            p.target_volume.to_string(),
            p.length.to_string(),
            p.converged.to_string(),
            p.iterations.to_string(),
            p.residual.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Numerical(format!("sweep write failed: {e}")))?;
    Ok(())
}
