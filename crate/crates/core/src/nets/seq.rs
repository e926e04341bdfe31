//! Conversions between point lists and `(batch, time, 2)` tensors.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::traj_data::Point;
use crate::{Error, Real, Result};

/// Stacks equal-length sequences into a `(batch, time, 2)` tensor.
pub fn stack<T: Real, S: AsRef<[Point]>>(seqs: &[S]) -> Result<Array3<T>> {
    let len = seqs.first().map_or(0, |s| s.as_ref().len());
    let mut out = Array3::zeros((seqs.len(), len, 2));
    for (b, s) in seqs.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != len {
            return Err(Error::Shape(format!(
                "sequence {b} has {} steps, expected {len}",
                s.len()
            )));
        }
        for (t, p) in s.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite point in sequence {b} step {t}"
                )));
            }
            out[[b, t, 0]] = T::c(p[0]);
            out[[b, t, 1]] = T::c(p[1]);
        }
    }
    Ok(out)
}

pub fn unstack<T: Real>(x: &Array3<T>) -> Vec<Vec<Point>> {
    x.outer_iter()
        .map(|seq| seq.outer_iter().map(|p| [p[0].f64(), p[1].f64()]).collect())
        .collect()
}

/// Stacks 2-vectors into a `(batch, 2)` matrix.
pub fn stack_points<T: Real>(points: &[Point]) -> Array2<T> {
    Array2::from_shape_fn((points.len(), 2), |(b, d)| T::c(points[b][d]))
}

pub(crate) fn step<T: Real>(x: &Array3<T>, t: usize) -> ArrayView2<'_, T> {
    x.index_axis(Axis(1), t)
}
