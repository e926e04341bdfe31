//! Config-driven runner for the adaptation pipeline.
//!
//! A run reads a JSON [`RunConfig`], takes an exclusive lock on its output
//! directory and executes one stage (or `all`). Every artifact carries the
//! config hash.

pub mod config;
pub mod error;
pub mod stages;

use std::path::{Path, PathBuf};

pub use config::{PlotConfig, RunConfig};
pub use error::{CliError, Result};
pub use stages::{StageName, Workspace};

use error::io;
use stages::DirLock;

/// Runs `stage` (falling back to the config's `stage`) for the config at
/// `config_path`. The output directory is `out` if given, else the
/// config's `output_dir`.
pub fn cmd_run(
    config_path: &Path,
    stage: Option<StageName>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = RunConfig::load(config_path)?.with_seed(seed);
    let stage = stage.or(cfg.stage).ok_or_else(|| CliError::Config {
        path: config_path.to_path_buf(),
        msg: "no stage given (use --stage or the `stage` field)".into(),
    })?;
    let root = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config {
            path: config_path.to_path_buf(),
            msg: "no output directory (use --out, CTP_OUT_DIR or `output_dir`)".into(),
        })?;
    std::fs::create_dir_all(&root).map_err(io(&root))?;
    let _lock = DirLock::acquire(&root)?;
    let ws = Workspace::new(root, cfg);
    ws.write_config_echo()?;
    ws.run(stage)
}
