//! Feature alignment: a Wasserstein critic on trajectory features against
//! a target encoder initialised from the frozen source encoder.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;

use super::batch::{select_rows, select_seqs, Batch};
use super::{
    at_epoch, check_finite, critic_loss_and_grad, sample_indices, stage_rng, StageReport,
    TrainingConfig,
};
use crate::nets::{ModelBundle, ParamSet, Stage};
use crate::optim::RmsProp;
use crate::traj_data::{DomainSplit, TrajectoryWindow};
use crate::{Error, Real, Result};

const SALT: u64 = 2;
const STAGE: &str = "adapt-feature";

/// Per epoch: `critic_iters` critic updates on freshly sampled source and
/// target batches, then one target-encoder update minimising
/// `-mean D(TE(o_t))`. The source encoder and decoder are not touched.
pub fn stage1_align<T: Real>(
    split: &DomainSplit,
    nets: &mut ModelBundle<T>,
    cfg: &TrainingConfig,
) -> Result<StageReport> {
    cfg.validate()?;
    nets.require(Stage::TrainSource)?;
    if split.target_train.is_empty() {
        return Err(Error::Split("target training set is empty".into()));
    }
    if split.source_train.is_empty() {
        return Err(Error::Split("source training set is empty".into()));
    }
    let started = Instant::now();
    let repr = nets.config.representation;
    let mut rng = stage_rng(cfg.seed, SALT);
    let mut report = StageReport::new(STAGE);

    nets.target_encoder = nets.source_encoder.clone();
    fn refs(w: &[TrajectoryWindow]) -> Vec<&TrajectoryWindow> {
        w.iter().collect()
    }
    let (source_obs, _) = Batch::<T>::inputs(&refs(&split.source_train), repr)?;
    let (target_obs, _) = Batch::<T>::inputs(&refs(&split.target_train), repr)?;
    let (source_feats, _) = nets.source_encoder.forward(&source_obs);

    let m = cfg.batch_size;
    let mut critic_opt = RmsProp::<T>::new(cfg.critic_lr);
    let mut encoder_opt = RmsProp::<T>::new(cfg.generator_lr);

    for epoch in 0..cfg.epochs {
        let mut critic_loss = 0.0;
        let mut w_est = 0.0;
        for _ in 0..cfg.critic_iters {
            let ms = select_rows(
                &source_feats,
                &sample_indices(&mut rng, source_feats.nrows(), m),
            );
            let ot = select_seqs(
                &target_obs,
                &sample_indices(&mut rng, target_obs.shape()[0], m),
            );
            let (mt, _) = nets.target_encoder.forward(&ot);
            let gammas: Vec<T> = (0..m).map(|_| T::c(rng.random::<f64>())).collect();
            let mut grad = nets.feature_critic.zeros_like();
            let loss = critic_loss_and_grad(
                &nets.feature_critic,
                &ms,
                &mt,
                cfg.gp_coeff,
                &gammas,
                &mut grad,
            )
            .map_err(at_epoch(STAGE, epoch))?;
            critic_opt.step(&mut nets.feature_critic, &grad);
            report.critic_updates += 1;
            critic_loss += loss.total.f64();
            w_est += loss.wasserstein.f64();
        }
        let n = cfg.critic_iters as f64;
        report.critic_loss.push(critic_loss / n);
        report.w_distance.push(w_est / n);

        let ot = select_seqs(
            &target_obs,
            &sample_indices(&mut rng, target_obs.shape()[0], m),
        );
        let gen_loss = encoder_step(nets, &ot, &mut encoder_opt)?;
        report.generator_loss.push(gen_loss);
        report.generator_updates += 1;
        report.epochs_run += 1;

        check_finite(STAGE, epoch, "critic loss", critic_loss)?;
        check_finite(STAGE, epoch, "encoder loss", gen_loss)?;
        if !nets.target_encoder.all_finite() || !nets.feature_critic.all_finite() {
            return Err(Error::Training {
                stage: STAGE,
                epoch,
                msg: "non-finite parameters".into(),
            });
        }
        log::debug!(
            "{STAGE} epoch {epoch}: critic {critic_loss:.5} W {w_est:.5} gen {gen_loss:.5}"
        );
    }
    nets.mark(Stage::AdaptFeature);
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

fn encoder_step<T: Real>(
    nets: &mut ModelBundle<T>,
    obs: &ndarray::Array3<T>,
    opt: &mut RmsProp<T>,
) -> Result<f64> {
    let m = obs.shape()[0];
    let (feats, cache) = nets.target_encoder.forward(obs);
    let eval = nets.feature_critic.eval(&feats)?;
    let loss = -eval.scores.sum() / T::c(m as f64);
    let mut critic_scratch = nets.feature_critic.zeros_like();
    let dfeat: Array2<T> = nets.feature_critic.backward(
        &eval,
        &Array1::from_elem(m, -T::one() / T::c(m as f64)),
        &mut critic_scratch,
    );
    let mut grad = nets.target_encoder.zeros_like();
    nets.target_encoder.backward(&cache, &dfeat, &mut grad);
    opt.step(&mut nets.target_encoder, &grad);
    Ok(loss.f64())
}
