use std::time::Instant;

use ndarray::Array3;
use rand::seq::SliceRandom;

use super::batch::Batch;
use super::infer::predict_with;
use super::{check_finite, stage_rng, StageReport, TrainingConfig};
use crate::metrics::ade_fde;
use crate::nets::{Decoder, Encoder, ModelBundle, ParamSet, Representation, Stage};
use crate::optim::RmsProp;
use crate::traj_data::{DomainSplit, TrajectoryWindow};
use crate::{Error, Real, Result};

const SALT: u64 = 1;

/// Teacher-forced supervised training of an encoder/decoder pair on offset
/// (or coordinate) mean squared error.
pub(crate) struct Supervised<'a, T: Real> {
    pub encoder: &'a mut Encoder<T>,
    pub decoder: &'a mut Decoder<T>,
    enc_opt: RmsProp<T>,
    dec_opt: RmsProp<T>,
    repr: Representation,
}

impl<'a, T: Real> Supervised<'a, T> {
    pub fn new(
        encoder: &'a mut Encoder<T>,
        decoder: &'a mut Decoder<T>,
        lr: f64,
        repr: Representation,
    ) -> Self {
        Self {
            encoder,
            decoder,
            enc_opt: RmsProp::new(lr),
            dec_opt: RmsProp::new(lr),
            repr,
        }
    }

    /// Multiplies both learning rates by `factor`.
    pub fn decay(&mut self, factor: f64) {
        self.enc_opt.lr = self.enc_opt.lr * T::c(factor);
        self.dec_opt.lr = self.dec_opt.lr * T::c(factor);
    }

    /// One gradient step; returns the batch loss.
    pub fn step(&mut self, windows: &[&TrajectoryWindow]) -> Result<f64> {
        let batch = Batch::<T>::new(windows, self.repr)?;
        let steps = batch.targets.shape()[1];
        let (feature, enc_cache) = self.encoder.forward(&batch.obs);
        let (pred, dec_cache) =
            self.decoder
                .forward(&feature, &batch.seed, steps, Some(&batch.targets))?;
        let diff: Array3<T> = &pred - &batch.targets;
        let n = T::c(diff.len() as f64);
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / n;
        let dpred = diff.mapv(|d| T::c(2.0) * d / n);

        let mut dec_grad = self.decoder.zeros_like();
        let dfeature = self.decoder.backward(&dec_cache, &dpred, &mut dec_grad);
        let mut enc_grad = self.encoder.zeros_like();
        self.encoder.backward(&enc_cache, &dfeature, &mut enc_grad);
        self.dec_opt.step(self.decoder, &dec_grad);
        self.enc_opt.step(self.encoder, &enc_grad);
        Ok(loss.f64())
    }

    /// One pass over `windows` in minibatches; returns the mean batch loss.
    pub fn epoch(
        &mut self,
        windows: &[TrajectoryWindow],
        batch_size: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<f64> {
        let mut order: Vec<usize> = (0..windows.len()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let refs: Vec<&TrajectoryWindow> = chunk.iter().map(|&i| &windows[i]).collect();
            total += self.step(&refs)?;
            batches += 1;
        }
        Ok(total / batches as f64)
    }
}

/// Trains the source encoder and decoder. Stops early when the validation
/// ADE has not improved for `patience` epochs and restores the best
/// parameters seen.
pub fn train_source<T: Real>(
    split: &DomainSplit,
    nets: &mut ModelBundle<T>,
    cfg: &TrainingConfig,
) -> Result<StageReport> {
    cfg.validate()?;
    if split.source_train.is_empty() {
        return Err(Error::Split("source training set is empty".into()));
    }
    let started = Instant::now();
    let repr = nets.config.representation;
    let mut report = StageReport::new(Stage::TrainSource.name());
    let mut rng = stage_rng(cfg.seed, SALT);

    let mut enc = nets.source_encoder.clone();
    let mut dec = nets.source_decoder.clone();
    let mut best: Option<(f64, Encoder<T>, Decoder<T>)> = None;
    let mut since_best = 0;
    {
        let mut trainer = Supervised::new(&mut enc, &mut dec, cfg.source_lr, repr);
        for epoch in 0..cfg.source_epochs {
            let loss = trainer.epoch(&split.source_train, cfg.source_batch_size, &mut rng)?;
            check_finite("train-source", epoch, "training loss", loss)?;
            report.generator_loss.push(loss);
            report.generator_updates += split.source_train.len().div_ceil(cfg.source_batch_size);
            report.epochs_run += 1;
            trainer.decay(cfg.lr_decay);

            if split.source_val.is_empty() {
                continue;
            }
            let preds = predict_with(
                trainer.encoder,
                trainer.decoder,
                None,
                &split.source_val,
                repr,
            )?;
            let gts: Vec<_> = split.source_val.iter().map(|w| w.fut.clone()).collect();
            let (ade, _) = ade_fde(&preds, &gts)?;
            check_finite("train-source", epoch, "validation ADE", ade)?;
            report.val_ade.push(ade);
            log::debug!("train-source epoch {epoch}: loss {loss:.6} val ADE {ade:.4}");
            if best.as_ref().is_none_or(|(b, _, _)| ade < *b) {
                best = Some((ade, trainer.encoder.clone(), trainer.decoder.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    let (enc, dec) = match best {
        Some((_, e, d)) => (e, d),
        None => (enc, dec),
    };
    nets.source_encoder = enc;
    nets.source_decoder = dec;
    nets.mark(Stage::TrainSource);
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
