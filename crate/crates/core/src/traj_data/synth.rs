//! Synthetic pedestrians and domain shifts for desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnnotationRow, Point, RawAnnotationTable, TrajectoryWindow};
use crate::{Error, Result};

/// Maps every coordinate `c` to `speed_scale * (linear * c) + translation`
/// plus isotropic gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticShiftSpec {
    pub linear: [[f64; 2]; 2],
    pub translation: Point,
    pub speed_scale: f64,
    pub noise_std: f64,
}

impl Default for SyntheticShiftSpec {
    fn default() -> Self {
        Self::identity()
    }
}

impl SyntheticShiftSpec {
    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
            speed_scale: 1.0,
            noise_std: 0.0,
        }
    }

    pub fn det(&self) -> f64 {
        let a = self.linear;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.det().abs() > 1e-8) {
            return Err(Error::Spec(format!(
                "linear map is singular (det = {})",
                self.det()
            )));
        }
        if !(self.speed_scale > 0.0) {
            return Err(Error::Spec(format!(
                "speed scale must be positive, got {}",
                self.speed_scale
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Spec(format!(
                "noise std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// Noise-free forward map.
    pub fn map_point(&self, c: Point) -> Point {
        let a = self.linear;
        let s = self.speed_scale;
        [
            s * (a[0][0] * c[0] + a[0][1] * c[1]) + self.translation[0],
            s * (a[1][0] * c[0] + a[1][1] * c[1]) + self.translation[1],
        ]
    }

    /// Inverse of [`Self::map_point`].
    pub fn invert_point(&self, c: Point) -> Point {
        let a = self.linear;
        let det = self.det();
        let u = [
            (c[0] - self.translation[0]) / self.speed_scale,
            (c[1] - self.translation[1]) / self.speed_scale,
        ];
        [
            (a[1][1] * u[0] - a[0][1] * u[1]) / det,
            (-a[1][0] * u[0] + a[0][0] * u[1]) / det,
        ]
    }
}

struct Shifter {
    spec: SyntheticShiftSpec,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Shifter {
    fn new(spec: &SyntheticShiftSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let noise = (spec.noise_std > 0.0)
            .then(|| Normal::new(0.0, spec.noise_std).expect("validated std"));
        Ok(Self {
            spec: *spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
        })
    }

    fn shift(&mut self, c: Point) -> Point {
        let [x, y] = self.spec.map_point(c);
        match &self.noise {
            Some(n) => [x + n.sample(&mut self.rng), y + n.sample(&mut self.rng)],
            None => [x, y],
        }
    }
}

pub fn apply_shift(
    windows: &[TrajectoryWindow],
    spec: &SyntheticShiftSpec,
    seed: u64,
) -> Result<Vec<TrajectoryWindow>> {
    let mut shifter = Shifter::new(spec, seed)?;
    Ok(windows
        .iter()
        .map(|w| TrajectoryWindow {
            ped_id: w.ped_id,
            start_frame: w.start_frame,
            obs: w.obs.iter().map(|&c| shifter.shift(c)).collect(),
            fut: w.fut.iter().map(|&c| shifter.shift(c)).collect(),
        })
        .collect())
}

/// Same mapping applied to raw annotation rows.
pub fn apply_shift_table(
    table: &RawAnnotationTable,
    spec: &SyntheticShiftSpec,
    seed: u64,
) -> Result<RawAnnotationTable> {
    let mut shifter = Shifter::new(spec, seed)?;
    Ok(RawAnnotationTable {
        rows: table
            .rows
            .iter()
            .map(|r| {
                let [x, y] = shifter.shift([r.x, r.y]);
                AnnotationRow { x, y, ..*r }
            })
            .collect(),
    })
}

/// Parameters of the synthetic pedestrian generator. Each pedestrian walks
/// with a constant speed and a constant turn rate from a random start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackSpec {
    pub n_peds: usize,
    pub track_len: usize,
    /// Frame-id increment between consecutive samples.
    pub frame_step: i64,
    /// Meters per sample.
    pub speed_range: [f64; 2],
    /// Std of the per-pedestrian turn rate, radians per sample.
    pub turn_std: f64,
    pub noise_std: f64,
    /// `[x_min, x_max, y_min, y_max]` for start positions.
    pub area: [f64; 4],
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self {
            n_peds: 200,
            track_len: 20,
            frame_step: 10,
            speed_range: [0.3, 0.6],
            turn_std: 0.0,
            noise_std: 0.0,
            area: [0.0, 10.0, 0.0, 10.0],
        }
    }
}

/// Pedestrian `i` enters at frame `i * frame_step`, so windows cut from the
/// result are time-ordered by pedestrian index.
pub fn generate_tracks(spec: &TrackSpec, seed: u64) -> Result<RawAnnotationTable> {
    let [s_lo, s_hi] = spec.speed_range;
    if !(s_lo > 0.0 && s_hi >= s_lo)
        || spec.frame_step <= 0
        || spec.turn_std < 0.0
        || spec.noise_std < 0.0
    {
        return Err(Error::Config(format!("invalid track spec: {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(spec.n_peds * spec.track_len);
    for ped in 0..spec.n_peds {
        let speed = if s_hi > s_lo {
            rng.random_range(s_lo..s_hi)
        } else {
            s_lo
        };
        let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
        let turn = spec.turn_std * unit.sample(&mut rng);
        let mut pos = [
            rng.random_range(spec.area[0]..=spec.area[1]),
            rng.random_range(spec.area[2]..=spec.area[3]),
        ];
        let t0 = ped as i64 * spec.frame_step;
        for k in 0..spec.track_len {
            let (nx, ny) = if spec.noise_std > 0.0 {
                (
                    spec.noise_std * unit.sample(&mut rng),
                    spec.noise_std * unit.sample(&mut rng),
                )
            } else {
                (0.0, 0.0)
            };
            rows.push(AnnotationRow {
                frame_id: t0 + k as i64 * spec.frame_step,
                ped_id: ped as i64,
                x: pos[0] + nx,
                y: pos[1] + ny,
            });
            pos[0] += speed * heading.cos();
            pos[1] += speed * heading.sin();
            heading += turn;
        }
    }
    Ok(RawAnnotationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj_data::{extract_windows, to_offsets};

    fn sample_windows() -> Vec<TrajectoryWindow> {
        let spec = TrackSpec {
            n_peds: 6,
            turn_std: 0.05,
            ..Default::default()
        };
        extract_windows(&generate_tracks(&spec, 3).unwrap(), 8, 12, 1).unwrap()
    }

    #[test]
    fn identity_spec_is_noop() {
        let w = sample_windows();
        assert_eq!(
            apply_shift(&w, &SyntheticShiftSpec::identity(), 1).unwrap(),
            w
        );
    }

    #[test]
    fn translation_keeps_offsets() {
        let w = sample_windows();
        let spec = SyntheticShiftSpec {
            translation: [5.0, 5.0],
            ..SyntheticShiftSpec::identity()
        };
        let s = apply_shift(&w, &spec, 1).unwrap();
        for (a, b) in w.iter().zip(&s) {
            for (p, q) in a.all_points().zip(b.all_points()) {
                assert_eq!([p[0] + 5.0, p[1] + 5.0], *q);
            }
            let da = to_offsets(&a.obs).unwrap().offsets;
            let db = to_offsets(&b.obs).unwrap().offsets;
            for (u, v) in da.iter().zip(&db) {
                assert!((u[0] - v[0]).abs() < 1e-12 && (u[1] - v[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubling_map_doubles_offsets() {
        let w = sample_windows();
        let spec = SyntheticShiftSpec {
            linear: [[2.0, 0.0], [0.0, 2.0]],
            ..SyntheticShiftSpec::identity()
        };
        let s = apply_shift(&w, &spec, 1).unwrap();
        for (a, b) in w.iter().zip(&s) {
            // Differencing oracle, independent of `to_offsets`.
            for k in 1..a.obs.len() {
                for d in 0..2 {
                    let orig = a.obs[k][d] - a.obs[k - 1][d];
                    let shifted = b.obs[k][d] - b.obs[k - 1][d];
                    assert_eq!(shifted, 2.0 * orig);
                }
            }
        }
    }

    #[test]
    fn singular_map_rejected() {
        let spec = SyntheticShiftSpec {
            linear: [[1.0, 2.0], [2.0, 4.0]],
            ..SyntheticShiftSpec::identity()
        };
        assert!(matches!(
            apply_shift(&sample_windows(), &spec, 0),
            Err(Error::Spec(_))
        ));
        let spec = SyntheticShiftSpec {
            speed_scale: 0.0,
            ..SyntheticShiftSpec::identity()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn noise_free_shift_is_invertible() {
        let spec = SyntheticShiftSpec {
            linear: [[0.8, -0.6], [0.6, 0.8]],
            translation: [3.0, -7.0],
            speed_scale: 2.0,
            noise_std: 0.0,
        };
        let w = sample_windows();
        let s = apply_shift(&w, &spec, 11).unwrap();
        assert_eq!(s, apply_shift(&w, &spec, 12).unwrap());
        for (a, b) in w.iter().zip(&s) {
            for (p, q) in a.all_points().zip(b.all_points()) {
                let back = spec.invert_point(*q);
                assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_is_seeded() {
        let spec = SyntheticShiftSpec {
            noise_std: 0.1,
            ..SyntheticShiftSpec::identity()
        };
        let w = sample_windows();
        assert_eq!(
            apply_shift(&w, &spec, 5).unwrap(),
            apply_shift(&w, &spec, 5).unwrap()
        );
        assert_ne!(apply_shift(&w, &spec, 5).unwrap(), w);
    }

    #[test]
    fn constant_velocity_tracks() {
        let spec = TrackSpec {
            n_peds: 3,
            ..Default::default()
        };
        let table = generate_tracks(&spec, 0).unwrap();
        assert_eq!(table.len(), 60);
        for (_, rows) in table.tracks() {
            let d0 = [rows[1].x - rows[0].x, rows[1].y - rows[0].y];
            let speed = d0[0].hypot(d0[1]);
            assert!((0.3..0.6).contains(&speed));
            for w in rows.windows(2) {
                let d = [w[1].x - w[0].x, w[1].y - w[0].y];
                assert!((d[0] - d0[0]).abs() < 1e-9 && (d[1] - d0[1]).abs() < 1e-9);
            }
        }
    }
}
