//! Run configuration files.

use std::path::{Path, PathBuf};

use ctp_core::experiment::{DataSource, ExperimentConfig};
use ctp_core::metrics::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::stages::StageName;

/// Density grids written by `plot-offsets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    /// Kernel bandwidth in meters; Scott's rule when absent.
    pub bandwidth: Option<f64>,
    pub nx: usize,
    pub ny: usize,
}

impl Default for PlotConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            bandwidth: None,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Used when `--stage` is not given.
    #[serde(default)]
    pub stage: Option<StageName>,
    #[serde(default)]
    pub plot: PlotConfig,
}

impl RunConfig {
    /// Reads and validates a config, resolving relative data and output
    /// paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bad = |msg: String| CliError::Config {
            path: path.to_path_buf(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for source in [&mut cfg.experiment.source, &mut cfg.experiment.target] {
            if let DataSource::File { path: p, .. } = source {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.exists() {
                    return Err(bad(format!("data file {} does not exist", p.display())));
                }
            }
        }
        if let Some(out) = &mut cfg.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.experiment.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }

    /// Overrides the initialisation and training seeds; the split seed is
    /// kept so the data partition does not move.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.experiment.seeds.init = s;
            self.experiment.seeds.train = s;
        }
        self
    }

    pub fn hash(&self) -> String {
        self.experiment.hash()
    }
}
