//! Trajectory data: annotation parsing, windowing, offset conversion,
//! domain splits and synthetic domain shifts.

mod offsets;
mod parse;
mod split;
mod synth;
mod windows;

use serde::{Deserialize, Serialize};

pub use offsets::{from_offsets, to_offsets, OffsetSequence};
pub use parse::{parse_annotations, parse_annotations_str, write_annotations, ColumnOrder};
pub use split::{make_split, Domain, DomainPartition, DomainSplit};
pub use synth::{apply_shift, apply_shift_table, generate_tracks, SyntheticShiftSpec, TrackSpec};
pub use windows::{extract_windows, read_windows_json, write_windows_json};

/// A 2-D position or displacement in meters.
pub type Point = [f64; 2];

pub const DEFAULT_OBS_LEN: usize = 8;
pub const DEFAULT_FUT_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub frame_id: i64,
    pub ped_id: i64,
    pub x: f64,
    pub y: f64,
}

/// Rows of `(frame, pedestrian, x, y)` in world meters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawAnnotationTable {
    pub rows: Vec<AnnotationRow>,
}

impl RawAnnotationTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows grouped per pedestrian, each track sorted by frame. Pedestrians
    /// come out in ascending id order.
    pub fn tracks(&self) -> Vec<(i64, Vec<AnnotationRow>)> {
        let mut by_ped: std::collections::BTreeMap<i64, Vec<AnnotationRow>> = Default::default();
        for row in &self.rows {
            by_ped.entry(row.ped_id).or_default().push(*row);
        }
        by_ped
            .into_iter()
            .map(|(ped, mut rows)| {
                rows.sort_by_key(|r| r.frame_id);
                (ped, rows)
            })
            .collect()
    }
}

/// One pedestrian's observed and future coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryWindow {
    pub ped_id: i64,
    pub start_frame: i64,
    pub obs: Vec<Point>,
    pub fut: Vec<Point>,
}

impl TrajectoryWindow {
    pub fn last_obs(&self) -> Point {
        *self.obs.last().expect("window has observations")
    }

    /// Offsets between consecutive observed points (`obs.len() - 1` of them).
    pub fn obs_offsets(&self) -> Vec<Point> {
        self.obs.windows(2).map(|w| sub(w[1], w[0])).collect()
    }

    /// Offset leading into the first future point, i.e. the last observed
    /// displacement. This seeds the decoder.
    pub fn seed_offset(&self) -> Point {
        let n = self.obs.len();
        sub(self.obs[n - 1], self.obs[n - 2])
    }

    /// Future offsets, the first measured from the last observed point.
    pub fn fut_offsets(&self) -> Vec<Point> {
        let mut prev = self.last_obs();
        self.fut
            .iter()
            .map(|&p| {
                let d = sub(p, prev);
                prev = p;
                d
            })
            .collect()
    }

    pub fn all_points(&self) -> impl Iterator<Item = &Point> {
        self.obs.iter().chain(self.fut.iter())
    }
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[cfg(test)]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}
