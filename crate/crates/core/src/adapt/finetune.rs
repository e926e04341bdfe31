use std::time::Instant;

use super::infer::predict_with;
use super::source::Supervised;
use super::{check_finite, stage_rng, StageReport, TrainingConfig};
use crate::metrics::{evaluate, EvalReport};
use crate::nets::{ModelBundle, Stage};
use crate::traj_data::{DomainSplit, TrajectoryWindow};
use crate::{Error, Real, Result};

const SALT: u64 = 4;

/// Splits each observation in half: the first half becomes the input, the
/// second half the label. Target futures are never read.
pub fn pseudo_label_windows(windows: &[TrajectoryWindow]) -> Result<Vec<TrajectoryWindow>> {
    windows
        .iter()
        .map(|w| {
            let half = w.obs.len() / 2;
            if half < 2 {
                return Err(Error::Length {
                    needed: 4,
                    got: w.obs.len(),
                });
            }
            Ok(TrajectoryWindow {
                ped_id: w.ped_id,
                start_frame: w.start_frame,
                obs: w.obs[..half].to_vec(),
                fut: w.obs[half..].to_vec(),
            })
        })
        .collect()
}

/// Fine-tuning baseline: continues supervised training of copies of the
/// source encoder and decoder on pseudo-labelled target observations, then
/// evaluates them on the target test split.
pub fn finetune_baseline<T: Real>(
    split: &DomainSplit,
    nets: &mut ModelBundle<T>,
    cfg: &TrainingConfig,
) -> Result<(StageReport, EvalReport)> {
    cfg.validate()?;
    nets.require(Stage::TrainSource)?;
    if split.target_train.is_empty() {
        return Err(Error::Split("target training set is empty".into()));
    }
    if split.target_test.is_empty() {
        return Err(Error::Split("target test set is empty".into()));
    }
    let started = Instant::now();
    let repr = nets.config.representation;
    let mut report = StageReport::new(Stage::BaselineFinetune.name());
    let mut rng = stage_rng(cfg.seed, SALT);
    let pseudo = pseudo_label_windows(&split.target_train)?;

    let mut enc = nets.source_encoder.clone();
    let mut dec = nets.source_decoder.clone();
    {
        let mut trainer = Supervised::new(&mut enc, &mut dec, cfg.source_lr, repr);
        for epoch in 0..cfg.finetune_epochs {
            let loss = trainer.epoch(&pseudo, cfg.source_batch_size, &mut rng)?;
            check_finite("baseline-finetune", epoch, "pseudo-label loss", loss)?;
            report.generator_loss.push(loss);
            report.generator_updates += pseudo.len().div_ceil(cfg.source_batch_size);
            report.epochs_run += 1;
            trainer.decay(cfg.lr_decay);
        }
    }
    let preds = predict_with(&enc, &dec, None, &split.target_test, repr)?;
    let eval = evaluate(&preds, &split.target_test)?;
    nets.finetuned = Some((enc, dec));
    nets.mark(Stage::BaselineFinetune);
    report.seconds = started.elapsed().as_secs_f64();
    Ok((report, eval))
}
