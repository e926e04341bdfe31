//! Tensor assembly from trajectory windows, per representation.

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::nets::{seq, Representation};
use crate::traj_data::{from_offsets, Point, TrajectoryWindow};
use crate::{Real, Result};

/// Inputs and targets of one supervised batch.
pub struct Batch<T> {
    /// `(batch, obs_len, 2)` observed coordinates, the encoder input.
    pub obs: Array3<T>,
    /// `(batch, 2)` first decoder input.
    pub seed: Array2<T>,
    /// `(batch, fut_len, 2)` decoder targets.
    pub targets: Array3<T>,
}

impl<T: Real> Batch<T> {
    pub fn new(windows: &[&TrajectoryWindow], repr: Representation) -> Result<Self> {
        let obs: Vec<&[Point]> = windows.iter().map(|w| w.obs.as_slice()).collect();
        let seeds: Vec<Point> = windows.iter().map(|w| seed_step(w, repr)).collect();
        let targets: Vec<Vec<Point>> = windows.iter().map(|w| target_steps(w, repr)).collect();
        Ok(Self {
            obs: seq::stack(&obs)?,
            seed: seq::stack_points(&seeds),
            targets: seq::stack(&targets)?,
        })
    }

    /// Encoder inputs and decoder seeds only, for prediction.
    pub fn inputs(
        windows: &[&TrajectoryWindow],
        repr: Representation,
    ) -> Result<(Array3<T>, Array2<T>)> {
        let obs: Vec<&[Point]> = windows.iter().map(|w| w.obs.as_slice()).collect();
        let seeds: Vec<Point> = windows.iter().map(|w| seed_step(w, repr)).collect();
        Ok((seq::stack(&obs)?, seq::stack_points(&seeds)))
    }
}

pub(crate) fn seed_step(w: &TrajectoryWindow, repr: Representation) -> Point {
    match repr {
        Representation::Offset => w.seed_offset(),
        Representation::Coordinate => w.last_obs(),
    }
}

pub(crate) fn target_steps(w: &TrajectoryWindow, repr: Representation) -> Vec<Point> {
    match repr {
        Representation::Offset => w.fut_offsets(),
        Representation::Coordinate => w.fut.clone(),
    }
}

/// Observed steps in the representation: offsets between observed points
/// or the observed points themselves.
pub(crate) fn observed_steps(w: &TrajectoryWindow, repr: Representation) -> Vec<Point> {
    match repr {
        Representation::Offset => w.obs_offsets(),
        Representation::Coordinate => w.obs.clone(),
    }
}

/// Converts decoder outputs back to future coordinates.
pub(crate) fn to_coordinates(last_obs: Point, steps: &[Point], repr: Representation) -> Vec<Point> {
    match repr {
        Representation::Offset => from_offsets(last_obs, steps).split_off(1),
        Representation::Coordinate => steps.to_vec(),
    }
}

/// All stride-1 windows of `width` consecutive observed steps, flattened to
/// rows of `2 * width` values.
pub fn observed_windows<T: Real>(
    windows: &[TrajectoryWindow],
    repr: Representation,
    width: usize,
) -> Array2<T> {
    let mut rows: Vec<T> = Vec::new();
    let mut n = 0;
    for w in windows {
        let steps = observed_steps(w, repr);
        for chunk in steps.windows(width) {
            rows.extend(chunk.iter().flat_map(|p| [T::c(p[0]), T::c(p[1])]));
            n += 1;
        }
    }
    Array2::from_shape_vec((n, 2 * width), rows).expect("row-major rows")
}

/// `m` indices drawn uniformly with replacement from `0..n`.
pub fn sample_indices(rng: &mut impl Rng, n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..n)).collect()
}

pub(crate) fn select_rows<T: Real>(x: &Array2<T>, idx: &[usize]) -> Array2<T> {
    x.select(ndarray::Axis(0), idx)
}

pub(crate) fn select_seqs<T: Real>(x: &Array3<T>, idx: &[usize]) -> Array3<T> {
    x.select(ndarray::Axis(0), idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> TrajectoryWindow {
        TrajectoryWindow {
            ped_id: 0,
            start_frame: 0,
            obs: (0..8).map(|k| [k as f64, 0.5 * k as f64]).collect(),
            fut: (8..20).map(|k| [k as f64, 0.5 * k as f64]).collect(),
        }
    }

    #[test]
    fn offset_batch_layout() {
        let w = window();
        let b = Batch::<f64>::new(&[&w], Representation::Offset).unwrap();
        assert_eq!(b.obs.dim(), (1, 8, 2));
        assert_eq!(b.seed.row(0).to_vec(), vec![1.0, 0.5]);
        assert_eq!(b.targets.dim(), (1, 12, 2));
        assert!(b
            .targets
            .iter()
            .zip([1.0, 0.5].iter().cycle())
            .all(|(a, b)| a == b));
    }

    #[test]
    fn coordinate_batch_layout() {
        let w = window();
        let b = Batch::<f64>::new(&[&w], Representation::Coordinate).unwrap();
        assert_eq!(b.seed.row(0).to_vec(), vec![7.0, 3.5]);
        assert_eq!(b.targets[[0, 0, 0]], 8.0);
    }

    #[test]
    fn observed_window_counts() {
        let w = vec![window(), window()];
        // 7 offsets -> 2 windows of 6 each.
        assert_eq!(
            observed_windows::<f64>(&w, Representation::Offset, 6).dim(),
            (4, 12)
        );
        // 8 coordinates -> 3 windows of 6 each.
        assert_eq!(
            observed_windows::<f64>(&w, Representation::Coordinate, 6).dim(),
            (6, 12)
        );
    }

    #[test]
    fn coordinates_from_offsets() {
        let c = to_coordinates(
            [1.0, 1.0],
            &[[1.0, 0.0], [0.0, 2.0]],
            Representation::Offset,
        );
        assert_eq!(c, vec![[2.0, 1.0], [2.0, 3.0]]);
    }
}
