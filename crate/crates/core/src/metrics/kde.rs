//! Gaussian kernel density estimate evaluated on a regular grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::traj_data::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x_min, x_max, y_min, y_max]`; defaults to the sample range padded
    /// by four bandwidths on each side.
    pub extent: Option<[f64; 4]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 200,
            ny: 200,
            extent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `density[j][i]` is the density at `(xs[i], ys[j])`.
    pub density: Vec<Vec<f64>>,
    pub bandwidth: [f64; 2],
}

fn std_dev(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    (v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Product-Gaussian KDE. Without an explicit bandwidth each axis uses
/// Scott's rule, `K^(-1/6)` times the axis standard deviation; an axis with
/// zero spread borrows the other axis's bandwidth.
pub fn kde_grid(samples: &[Point], bandwidth: Option<f64>, grid: &GridSpec) -> Result<KdeGrid> {
    if samples.len() < 2 {
        return Err(Error::Shape(format!(
            "density estimate needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::Config(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    let bw = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => [h, h],
        Some(h) => {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        None => {
            let factor = (samples.len() as f64).powf(-1.0 / 6.0);
            let sx = std_dev(samples.iter().map(|p| p[0]));
            let sy = std_dev(samples.iter().map(|p| p[1]));
            match (sx > 0.0, sy > 0.0) {
                (true, true) => [factor * sx, factor * sy],
                (true, false) => [factor * sx, factor * sx],
                (false, true) => [factor * sy, factor * sy],
                (false, false) => {
                    return Err(Error::Numeric(
                        "samples have zero variance on both axes".into(),
                    ))
                }
            }
        }
    };
    let extent = grid.extent.unwrap_or_else(|| {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in samples {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        [
            x0 - 4.0 * bw[0],
            x1 + 4.0 * bw[0],
            y0 - 4.0 * bw[1],
            y1 + 4.0 * bw[1],
        ]
    });
    let xs = linspace(extent[0], extent[1], grid.nx);
    let ys = linspace(extent[2], extent[3], grid.ny);

    // Separable kernel: precompute per-axis factors for every sample.
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bw[0] * bw[1] * samples.len() as f64);
    let kx: Vec<Vec<f64>> = samples
        .iter()
        .map(|p| {
            xs.iter()
                .map(|x| (-0.5 * ((x - p[0]) / bw[0]).powi(2)).exp())
                .collect()
        })
        .collect();
    let ky: Vec<Vec<f64>> = samples
        .iter()
        .map(|p| {
            ys.iter()
                .map(|y| (-0.5 * ((y - p[1]) / bw[1]).powi(2)).exp())
                .collect()
        })
        .collect();
    let mut density = vec![vec![0.0; xs.len()]; ys.len()];
    for (fx, fy) in kx.iter().zip(&ky) {
        for (row, &wy) in density.iter_mut().zip(fy) {
            if wy < 1e-300 {
                continue;
            }
            for (d, &wx) in row.iter_mut().zip(fx) {
                *d += wx * wy;
            }
        }
    }
    for row in &mut density {
        for d in row.iter_mut() {
            *d *= norm;
        }
    }
    Ok(KdeGrid {
        xs,
        ys,
        density,
        bandwidth: bw,
    })
}

impl KdeGrid {
    /// Riemann sum of the density over the grid.
    pub fn integral(&self) -> f64 {
        let dx = (self.xs[self.xs.len() - 1] - self.xs[0]) / (self.xs.len() - 1) as f64;
        let dy = (self.ys[self.ys.len() - 1] - self.ys[0]) / (self.ys.len() - 1) as f64;
        self.density.iter().flatten().sum::<f64>() * dx * dy
    }

    /// Grid point of maximal density.
    pub fn mode(&self) -> Point {
        let mut best = (f64::MIN, [0.0, 0.0]);
        for (j, row) in self.density.iter().enumerate() {
            for (i, &d) in row.iter().enumerate() {
                if d > best.0 {
                    best = (d, [self.xs[i], self.ys[j]]);
                }
            }
        }
        best.1
    }

    /// `x,y,density` rows with a header, preceded by a `#` comment line
    /// when `comment` is given.
    pub fn write_csv(&self, mut out: impl Write, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "x,y,density")?;
        for (j, row) in self.density.iter().enumerate() {
            for (i, d) in row.iter().enumerate() {
                writeln!(out, "{},{},{}", self.xs[i], self.ys[j], d)?;
            }
        }
        Ok(())
    }
}
