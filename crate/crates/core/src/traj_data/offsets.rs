use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Per-step displacements plus the point preceding the first displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSequence<T = f64> {
    pub offsets: Vec<[T; 2]>,
    pub origin: [T; 2],
}

pub fn to_offsets<T: Real>(coords: &[[T; 2]]) -> Result<OffsetSequence<T>> {
    if coords.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            got: coords.len(),
        });
    }
    Ok(OffsetSequence {
        offsets: coords
            .windows(2)
            .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
            .collect(),
        origin: coords[0],
    })
}

pub fn from_offsets<T: Real>(origin: [T; 2], offsets: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut out = Vec::with_capacity(offsets.len() + 1);
    let mut cur = origin;
    out.push(cur);
    for d in offsets {
        cur = [cur[0] + d[0], cur[1] + d[1]];
        out.push(cur);
    }
    out
}

impl<T: Real> OffsetSequence<T> {
    pub fn reconstruct(&self) -> Vec<[T; 2]> {
        from_offsets(self.origin, &self.offsets)
    }
}
