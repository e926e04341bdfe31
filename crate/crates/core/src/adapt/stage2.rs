//! Offset alignment: a critic on windows of target observed steps against
//! adaptor-transformed predictions of the frozen target encoder and source
//! decoder.

use std::time::Instant;

use ndarray::{s, Array1, Array2, Array3};
use rand::Rng;

use super::batch::{observed_windows, select_rows, select_seqs, Batch};
use super::{
    at_epoch, check_finite, critic_loss_and_grad, sample_indices, stage_rng, StageReport,
    TrainingConfig,
};
use crate::nets::{ModelBundle, ParamSet, Stage};
use crate::optim::RmsProp;
use crate::traj_data::{DomainSplit, TrajectoryWindow};
use crate::{Error, Real, Result};

const SALT: u64 = 3;
const STAGE: &str = "adapt-offset";

/// Real samples are stride-1 windows of `ca_window` observed target steps.
/// Fake samples are windows at random positions of the adapted predictions.
/// Per epoch: `critic_iters` critic updates, then one adaptor update
/// minimising `-mean D(fake)`.
pub fn stage2_align<T: Real>(
    split: &DomainSplit,
    nets: &mut ModelBundle<T>,
    cfg: &TrainingConfig,
) -> Result<StageReport> {
    cfg.validate()?;
    nets.require(Stage::AdaptFeature)?;
    if split.target_train.is_empty() {
        return Err(Error::Split("target training set is empty".into()));
    }
    let started = Instant::now();
    let repr = nets.config.representation;
    let width = nets.config.ca_window;
    let fut_len = nets.config.fut_len;
    let mut rng = stage_rng(cfg.seed, SALT);
    let mut report = StageReport::new(STAGE);

    let real_pool: Array2<T> = observed_windows(&split.target_train, repr, width);
    if real_pool.nrows() == 0 {
        return Err(Error::Config(format!(
            "observations too short for windows of {width} steps"
        )));
    }
    // The encoder and decoder are frozen, so predictions are computed once.
    let refs: Vec<&TrajectoryWindow> = split.target_train.iter().collect();
    let (obs, seed) = Batch::<T>::inputs(&refs, repr)?;
    let (feats, _) = nets.target_encoder.forward(&obs);
    let (preds, _) = nets.source_decoder.forward(&feats, &seed, fut_len, None)?;

    let m = cfg.batch_size;
    let mut critic_opt = RmsProp::<T>::new(cfg.critic_lr);
    let mut adaptor_opt = RmsProp::<T>::new(cfg.generator_lr);
    let n_targets = preds.shape()[0];

    for epoch in 0..cfg.epochs {
        let mut critic_loss = 0.0;
        let mut w_est = 0.0;
        for _ in 0..cfg.critic_iters {
            let real = select_rows(&real_pool, &sample_indices(&mut rng, real_pool.nrows(), m));
            let batch = select_seqs(&preds, &sample_indices(&mut rng, n_targets, m));
            let starts = sample_indices(&mut rng, fut_len - width + 1, m);
            let (adapted, _) = nets.offset_adaptor.forward(&batch)?;
            let fake = gather_windows(&adapted, &starts, width);
            let gammas: Vec<T> = (0..m).map(|_| T::c(rng.random::<f64>())).collect();
            let mut grad = nets.offset_critic.zeros_like();
            let loss = critic_loss_and_grad(
                &nets.offset_critic,
                &real,
                &fake,
                cfg.gp_coeff,
                &gammas,
                &mut grad,
            )
            .map_err(at_epoch(STAGE, epoch))?;
            critic_opt.step(&mut nets.offset_critic, &grad);
            report.critic_updates += 1;
            critic_loss += loss.total.f64();
            w_est += loss.wasserstein.f64();
        }
        let n = cfg.critic_iters as f64;
        report.critic_loss.push(critic_loss / n);
        report.w_distance.push(w_est / n);

        let batch = select_seqs(&preds, &sample_indices(&mut rng, n_targets, m));
        let starts = sample_indices(&mut rng, fut_len - width + 1, m);
        let gen_loss = adaptor_step(nets, &batch, &starts, &mut adaptor_opt)?;
        report.generator_loss.push(gen_loss);
        report.generator_updates += 1;
        report.epochs_run += 1;

        check_finite(STAGE, epoch, "critic loss", critic_loss)?;
        check_finite(STAGE, epoch, "adaptor loss", gen_loss)?;
        if !nets.offset_adaptor.all_finite() || !nets.offset_critic.all_finite() {
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
    nets.mark(Stage::AdaptOffset);
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Row `b` is `seqs[b, starts[b]..starts[b] + width, :]` flattened.
fn gather_windows<T: Real>(seqs: &Array3<T>, starts: &[usize], width: usize) -> Array2<T> {
    let mut out = Array2::zeros((starts.len(), 2 * width));
    for (b, &s0) in starts.iter().enumerate() {
        let win = seqs.slice(s![b, s0..s0 + width, ..]);
        for (k, v) in win.iter().enumerate() {
            out[[b, k]] = *v;
        }
    }
    out
}

fn adaptor_step<T: Real>(
    nets: &mut ModelBundle<T>,
    batch: &Array3<T>,
    starts: &[usize],
    opt: &mut RmsProp<T>,
) -> Result<f64> {
    let width = nets.config.ca_window;
    let m = starts.len();
    let (adapted, cache) = nets.offset_adaptor.forward(batch)?;
    let fake = gather_windows(&adapted, starts, width);
    let eval = nets.offset_critic.eval(&fake)?;
    let loss = -eval.scores.sum() / T::c(m as f64);
    let mut critic_scratch = nets.offset_critic.zeros_like();
    let dfake = nets.offset_critic.backward(
        &eval,
        &Array1::from_elem(m, -T::one() / T::c(m as f64)),
        &mut critic_scratch,
    );
    let mut dadapted = Array3::zeros(adapted.raw_dim());
    for (b, &s0) in starts.iter().enumerate() {
        for k in 0..width {
            dadapted[[b, s0 + k, 0]] += dfake[[b, 2 * k]];
            dadapted[[b, s0 + k, 1]] += dfake[[b, 2 * k + 1]];
        }
    }
    let mut grad = nets.offset_adaptor.zeros_like();
    nets.offset_adaptor.backward(&cache, &dadapted, &mut grad);
    opt.step(&mut nets.offset_adaptor, &grad);
    Ok(loss.f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_layout() {
        let seqs = Array3::from_shape_fn((2, 4, 2), |(b, t, d)| (100 * b + 10 * t + d) as f64);
        let w = gather_windows(&seqs, &[1, 2], 2);
        assert_eq!(w.row(0).to_vec(), vec![10.0, 11.0, 20.0, 21.0]);
        assert_eq!(w.row(1).to_vec(), vec![120.0, 121.0, 130.0, 131.0]);
    }
}
