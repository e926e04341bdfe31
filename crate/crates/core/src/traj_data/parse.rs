use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotationRow, RawAnnotationTable};
use crate::{Error, Result};

/// Which whitespace-separated column holds each field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnOrder {
    pub frame: usize,
    pub ped: usize,
    pub x: usize,
    pub y: usize,
}

impl Default for ColumnOrder {
    fn default() -> Self {
        Self {
            frame: 0,
            ped: 1,
            x: 2,
            y: 3,
        }
    }
}

impl ColumnOrder {
    pub fn validate(&self) -> Result<()> {
        let cols = [self.frame, self.ped, self.x, self.y];
        let distinct: HashSet<_> = cols.iter().collect();
        if distinct.len() != 4 {
            return Err(Error::Config(format!(
                "column order must name four distinct columns, got {cols:?}"
            )));
        }
        Ok(())
    }

    fn width(&self) -> usize {
        [self.frame, self.ped, self.x, self.y]
            .into_iter()
            .max()
            .unwrap()
            + 1
    }
}

pub fn parse_annotations(
    path: impl AsRef<Path>,
    order: ColumnOrder,
    downsample_stride: u32,
) -> Result<RawAnnotationTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_annotations_str(&text, path, order, downsample_stride)
}

/// Parses annotation text; `origin` is only used in error messages. Blank
/// lines and lines starting with `#` are skipped.
pub fn parse_annotations_str(
    text: &str,
    origin: impl AsRef<Path>,
    order: ColumnOrder,
    downsample_stride: u32,
) -> Result<RawAnnotationTable> {
    order.validate()?;
    if downsample_stride == 0 {
        return Err(Error::Config("downsample stride must be positive".into()));
    }
    let origin = origin.as_ref();
    let width = order.width().max(4);
    let mut seen = HashSet::new();
    let mut rows = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            msg,
        };
        let fields = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| err(format!("non-numeric field `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if fields.len() < width {
            return Err(err(format!(
                "expected at least {width} fields, found {}",
                fields.len()
            )));
        }
        let integral = |v: f64, what: &str| {
            if v.is_finite() && v.fract() == 0.0 {
                Ok(v as i64)
            } else {
                Err(err(format!("{what} `{v}` is not an integer")))
            }
        };
        let frame_id = integral(fields[order.frame], "frame id")?;
        let ped_id = integral(fields[order.ped], "pedestrian id")?;
        let (x, y) = (fields[order.x], fields[order.y]);
        if !x.is_finite() || !y.is_finite() {
            return Err(err("non-finite coordinate".into()));
        }
        if frame_id.rem_euclid(downsample_stride as i64) != 0 {
            continue;
        }
        if !seen.insert((frame_id, ped_id)) {
            return Err(Error::Integrity(format!(
                "{}:{lineno}: duplicate entry for frame {frame_id}, pedestrian {ped_id}",
                origin.display()
            )));
        }
        rows.push(AnnotationRow {
            frame_id,
            ped_id,
            x,
            y,
        });
    }
    Ok(RawAnnotationTable { rows })
}

/// Writes `frame ped x y` lines, the layout [`parse_annotations`] reads by default.
/// Writes `frame ped x y` lines, preceded by `# comment` when given.
pub fn write_annotations(
    table: &RawAnnotationTable,
    path: impl AsRef<Path>,
    comment: Option<&str>,
) -> Result<()> {
    let mut out = String::new();
    if let Some(c) = comment {
        writeln!(out, "# {c}").unwrap();
    }
    for r in &table.rows {
        writeln!(out, "{} {} {} {}", r.frame_id, r.ped_id, r.x, r.y).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}
