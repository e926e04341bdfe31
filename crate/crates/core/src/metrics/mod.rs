//! Displacement metrics, cumulative offsets and density grids.

mod kde;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kde::{kde_grid, GridSpec, KdeGrid};

use crate::traj_data::{Point, TrajectoryWindow};
use crate::{Error, Result};

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_shapes(preds: &[Vec<Point>], gts: &[Vec<Point>]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Shape("no trajectories to score".into()));
    }
    if preds.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let len = gts[0].len();
    if len == 0 {
        return Err(Error::Shape("empty trajectories".into()));
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if p.len() != len || g.len() != len {
            return Err(Error::Shape(format!(
                "trajectory {i}: {} predicted vs {} true steps (expected {len})",
                p.len(),
                g.len()
            )));
        }
    }
    Ok(())
}

/// Per-window `(mean displacement, final displacement)`.
pub fn per_window_errors(preds: &[Vec<Point>], gts: &[Vec<Point>]) -> Result<Vec<(f64, f64)>> {
    check_shapes(preds, gts)?;
    Ok(preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            let total: f64 = p.iter().zip(g).map(|(a, b)| dist(*a, *b)).sum();
            (
                total / p.len() as f64,
                dist(*p.last().unwrap(), *g.last().unwrap()),
            )
        })
        .collect())
}

/// ADE is the Euclidean error averaged over all windows and steps, FDE the
/// Euclidean error at the last step averaged over windows.
pub fn ade_fde(preds: &[Vec<Point>], gts: &[Vec<Point>]) -> Result<(f64, f64)> {
    let per = per_window_errors(preds, gts)?;
    let n = per.len() as f64;
    Ok((
        per.iter().map(|e| e.0).sum::<f64>() / n,
        per.iter().map(|e| e.1).sum::<f64>() / n,
    ))
}

/// Points relative to the last observed point.
pub fn cumulative_offsets(points: &[Point], last_obs: Point) -> Vec<Point> {
    points
        .iter()
        .map(|p| [p[0] - last_obs[0], p[1] - last_obs[1]])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ade: f64,
    pub fde: f64,
    pub n_windows: usize,
    pub per_window: Vec<(f64, f64)>,
    /// Predicted futures shifted so the last observed point is the origin.
    pub cumulative_offset_samples: Vec<Vec<Point>>,
}

/// Scores predictions against the windows' futures.
pub fn evaluate(preds: &[Vec<Point>], windows: &[TrajectoryWindow]) -> Result<EvalReport> {
    let gts: Vec<Vec<Point>> = windows.iter().map(|w| w.fut.clone()).collect();
    let per_window = per_window_errors(preds, &gts)?;
    let (ade, fde) = ade_fde(preds, &gts)?;
    Ok(EvalReport {
        ade,
        fde,
        n_windows: per_window.len(),
        per_window,
        cumulative_offset_samples: preds
            .iter()
            .zip(windows)
            .map(|(p, w)| cumulative_offsets(p, w.last_obs()))
            .collect(),
    })
}

/// Reports of every evaluated model variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub config_hash: String,
    /// Source-only model on the source validation split.
    pub source_val: Option<EvalReport>,
    /// Target test split, keyed by variant label (`SO`, `TE`, `TO`, `F-T`).
    pub target_test: BTreeMap<String, EvalReport>,
}
