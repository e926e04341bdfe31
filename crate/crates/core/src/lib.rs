//! Cross-domain pedestrian trajectory prediction.
//!
//! The crate is organised around the adaptation pipeline:
//!
//! * [`traj_data`] reads annotation files, cuts observation/future windows,
//!   converts coordinates to per-step offsets, splits domains and builds
//!   synthetic domain-shifted datasets.
//! * [`nets`] holds the encoders, decoder, critics and offset adaptor with
//!   hand-written forward and backward passes.
//! * [`adapt`] contains source training, feature alignment, offset alignment,
//!   target inference and the fine-tuning baseline.
//! * [`metrics`] computes ADE/FDE, cumulative offsets and KDE grids.
//! * [`experiment`] wires the stages together for in-memory runs.

pub mod adapt;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nets;
pub mod optim;
pub mod real;
pub mod traj_data;

pub use adapt::{StageReport, TrainingConfig};
pub use error::{Error, Result};
pub use metrics::{EvalReport, EvalSummary};
pub use nets::{ModelBundle, NetConfig, Representation, Stage};
pub use real::Real;
pub use traj_data::{DomainSplit, Point, SyntheticShiftSpec, TrajectoryWindow};
