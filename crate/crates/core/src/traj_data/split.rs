use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrajectoryWindow;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Train:validation at 8:2.
    Source,
    /// Train:test at 4:6.
    Target,
}

impl Domain {
    fn first_fraction(self) -> f64 {
        match self {
            Domain::Source => 0.8,
            Domain::Target => 0.4,
        }
    }
}

/// The two partitions of one domain: (train, val) for the source and
/// (train, test) for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPartition {
    pub first: Vec<TrajectoryWindow>,
    pub second: Vec<TrajectoryWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSplit {
    pub source_train: Vec<TrajectoryWindow>,
    pub source_val: Vec<TrajectoryWindow>,
    pub target_train: Vec<TrajectoryWindow>,
    pub target_test: Vec<TrajectoryWindow>,
}

impl DomainSplit {
    pub fn new(source: DomainPartition, target: DomainPartition) -> Self {
        Self {
            source_train: source.first,
            source_val: source.second,
            target_train: target.first,
            target_test: target.second,
        }
    }
}

/// Splits by contiguous time blocks: windows are ordered by
/// `(start_frame, ped_id)`, the earliest go to the first partition. The seed
/// only permutes the order inside each partition (it never moves a window
/// across the boundary), which fixes the order batches are later drawn in.
pub fn make_split(
    windows: &[TrajectoryWindow],
    domain: Domain,
    seed: u64,
) -> Result<DomainPartition> {
    if windows.len() < 5 {
        return Err(Error::Split(format!(
            "need at least 5 windows, got {}",
            windows.len()
        )));
    }
    let mut ordered = windows.to_vec();
    ordered.sort_by_key(|w| (w.start_frame, w.ped_id));
    let n_first = (windows.len() as f64 * domain.first_fraction()).round() as usize;
    let second = ordered.split_off(n_first);
    let mut first = ordered;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    first.shuffle(&mut rng);
    let mut second = second;
    second.shuffle(&mut rng);
    Ok(DomainPartition { first, second })
}
