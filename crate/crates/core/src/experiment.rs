//! End-to-end runs: data loading, domain splits and the stage sequence.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapt::{
    finetune_baseline, predict_windows, stage1_align, stage2_align, train_source, StageReport,
    TrainingConfig, Variant,
};
use crate::metrics::{evaluate, EvalReport, EvalSummary};
use crate::nets::{ModelBundle, NetConfig};
use crate::traj_data::{
    apply_shift, extract_windows, generate_tracks, make_split, parse_annotations, ColumnOrder,
    Domain, DomainSplit, SyntheticShiftSpec, TrackSpec, TrajectoryWindow,
};
use crate::{Error, Real, Result};

/// Where one domain's trajectories come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Whitespace-separated annotation file.
    File {
        path: PathBuf,
        #[serde(default)]
        column_order: ColumnOrder,
        #[serde(default = "one")]
        stride: u32,
    },
    /// Generated pedestrians, optionally pushed through a domain shift.
    Synthetic {
        #[serde(default)]
        tracks: TrackSpec,
        seed: u64,
        #[serde(default)]
        shift: Option<SyntheticShiftSpec>,
    },
}

fn one() -> u32 {
    1
}

impl DataSource {
    pub fn load(
        &self,
        obs_len: usize,
        fut_len: usize,
        slide: usize,
    ) -> Result<Vec<TrajectoryWindow>> {
        match self {
            DataSource::File {
                path,
                column_order,
                stride,
            } => {
                let table = parse_annotations(path, *column_order, *stride)?;
                extract_windows(&table, obs_len, fut_len, slide)
            }
            DataSource::Synthetic {
                tracks,
                seed,
                shift,
            } => {
                let table = generate_tracks(tracks, *seed)?;
                let windows = extract_windows(&table, obs_len, fut_len, slide)?;
                match shift {
                    Some(spec) => apply_shift(&windows, spec, seed.wrapping_add(1)),
                    None => Ok(windows),
                }
            }
        }
    }
}

/// Seeds are mandatory: nothing in a run draws from ambient entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Orders windows inside each split partition.
    pub split: u64,
    /// Parameter initialisation.
    pub init: u64,
    /// Batch sampling and interpolation coefficients.
    pub train: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub target: DataSource,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainingConfig,
    pub seeds: Seeds,
    /// Window stride along each track.
    #[serde(default = "one_usize")]
    pub slide: usize,
}

fn one_usize() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.training().validate()?;
        if self.slide == 0 {
            return Err(Error::Config("slide must be positive".into()));
        }
        Ok(())
    }

    /// Training hyperparameters with the run's training seed filled in.
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seeds.train,
            ..self.train.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("serialisable");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }

    pub fn build_split(&self) -> Result<DomainSplit> {
        let (lo, lf) = (self.net.obs_len, self.net.fut_len);
        let source = self.source.load(lo, lf, self.slide)?;
        let target = self.target.load(lo, lf, self.slide)?;
        Ok(DomainSplit::new(
            make_split(&source, Domain::Source, self.seeds.split)?,
            make_split(&target, Domain::Target, self.seeds.split.wrapping_add(1))?,
        ))
    }
}

/// Scores every variant whose stage has run. The source-only model is also
/// scored on the source validation split when it is non-empty.
pub fn evaluate_variants<T: Real>(
    nets: &ModelBundle<T>,
    split: &DomainSplit,
    config_hash: &str,
) -> Result<EvalSummary> {
    let mut summary = EvalSummary {
        config_hash: config_hash.to_string(),
        source_val: None,
        target_test: Default::default(),
    };
    if !split.source_val.is_empty() {
        let preds = predict_windows(nets, Variant::SourceOnly, &split.source_val)?;
        summary.source_val = Some(evaluate(&preds, &split.source_val)?);
    }
    for variant in Variant::ALL {
        if !nets.has_stage(variant.required_stage()) {
            continue;
        }
        let preds = predict_windows(nets, variant, &split.target_test)?;
        summary.target_test.insert(
            variant.label().to_string(),
            evaluate(&preds, &split.target_test)?,
        );
    }
    Ok(summary)
}

pub struct PipelineOutput {
    pub bundle: ModelBundle<f32>,
    pub split: DomainSplit,
    pub reports: Vec<StageReport>,
    pub finetune_eval: Option<EvalReport>,
    pub summary: EvalSummary,
}

/// Source training, feature alignment and offset alignment in sequence,
/// optionally followed by the fine-tuning baseline, then evaluation.
pub fn run_pipeline(cfg: &ExperimentConfig, with_finetune: bool) -> Result<PipelineOutput> {
    cfg.validate()?;
    let split = cfg.build_split()?;
    let train = cfg.training();
    let mut bundle = ModelBundle::<f32>::new(cfg.net.clone(), cfg.seeds.init)?;
    let mut reports = vec![
        train_source(&split, &mut bundle, &train)?,
        stage1_align(&split, &mut bundle, &train)?,
        stage2_align(&split, &mut bundle, &train)?,
    ];
    let finetune_eval = if with_finetune {
        let (report, eval) = finetune_baseline(&split, &mut bundle, &train)?;
        reports.push(report);
        Some(eval)
    } else {
        None
    };
    let summary = evaluate_variants(&bundle, &split, &cfg.hash())?;
    Ok(PipelineOutput {
        bundle,
        split,
        reports,
        finetune_eval,
        summary,
    })
}
