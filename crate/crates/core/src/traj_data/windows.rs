use std::path::Path;

use super::{AnnotationRow, RawAnnotationTable, TrajectoryWindow};
use crate::{Error, Result};

/// Cuts every run of `obs_len + fut_len` consecutive samples per pedestrian,
/// advancing by `slide`. Tracks are broken wherever the frame gap exceeds the
/// dataset's sampling period (the smallest positive gap seen in any track).
///
/// Output is ordered by `(start_frame, ped_id)` so later splitting by
/// contiguous blocks follows time.
pub fn extract_windows(
    table: &RawAnnotationTable,
    obs_len: usize,
    fut_len: usize,
    slide: usize,
) -> Result<Vec<TrajectoryWindow>> {
    if obs_len < 2 || fut_len < 1 || slide < 1 {
        return Err(Error::Config(format!(
            "window lengths need obs >= 2, fut >= 1, slide >= 1 (got {obs_len}, {fut_len}, {slide})"
        )));
    }
    let tracks = table.tracks();
    let period = tracks
        .iter()
        .flat_map(|(_, rows)| rows.windows(2).map(|w| w[1].frame_id - w[0].frame_id))
        .filter(|&d| d > 0)
        .min();

    let total = obs_len + fut_len;
    let mut out = Vec::new();
    for (ped_id, rows) in &tracks {
        for run in contiguous_runs(rows, period) {
            if run.len() < total {
                continue;
            }
            for start in (0..=run.len() - total).step_by(slide) {
                let pts: Vec<_> = run[start..start + total]
                    .iter()
                    .map(|r| [r.x, r.y])
                    .collect();
                out.push(TrajectoryWindow {
                    ped_id: *ped_id,
                    start_frame: run[start].frame_id,
                    obs: pts[..obs_len].to_vec(),
                    fut: pts[obs_len..].to_vec(),
                });
            }
        }
    }
    out.sort_by_key(|w| (w.start_frame, w.ped_id));
    Ok(out)
}

fn contiguous_runs(rows: &[AnnotationRow], period: Option<i64>) -> Vec<&[AnnotationRow]> {
    let Some(period) = period else {
        return vec![rows];
    };
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..rows.len() {
        if rows[i].frame_id - rows[i - 1].frame_id != period {
            runs.push(&rows[start..i]);
            start = i;
        }
    }
    runs.push(&rows[start..]);
    runs
}

pub fn write_windows_json(windows: &[TrajectoryWindow], path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, windows)?;
    Ok(())
}

pub fn read_windows_json(path: impl AsRef<Path>) -> Result<Vec<TrajectoryWindow>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}
