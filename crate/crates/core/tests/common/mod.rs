#![allow(dead_code)]

pub mod grad;

use ctp_core::experiment::{DataSource, ExperimentConfig, Seeds};
use ctp_core::nets::ParamSet;
use ctp_core::traj_data::{SyntheticShiftSpec, TrackSpec};
use ctp_core::{NetConfig, Representation, TrainingConfig};

/// Small networks that train in seconds on a CPU.
pub fn desk_net(representation: Representation) -> NetConfig {
    NetConfig {
        embed_dim: 16,
        hidden_dim: 32,
        decoder_mlp_layers: 1,
        decoder_mlp_hidden: 32,
        adaptor_hidden: 32,
        critic_hidden: 32,
        feature_critic_layers: 3,
        offset_critic_layers: 3,
        representation,
        ..Default::default()
    }
}

pub fn desk_train() -> TrainingConfig {
    TrainingConfig {
        critic_lr: 3e-3,
        generator_lr: 1e-4,
        batch_size: 32,
        epochs: 400,
        critic_iters: 5,
        source_epochs: 200,
        source_lr: 1e-3,
        source_batch_size: 4,
        lr_decay: 0.98,
        patience: 0,
        ..Default::default()
    }
}

/// 200 constant-velocity pedestrians of 20 samples each, one window apiece.
pub fn synthetic(seed: u64, shift: Option<SyntheticShiftSpec>) -> DataSource {
    DataSource::Synthetic {
        tracks: TrackSpec::default(),
        seed,
        shift,
    }
}

pub fn speed_shift() -> SyntheticShiftSpec {
    SyntheticShiftSpec {
        translation: [5.0, 5.0],
        speed_scale: 2.0,
        ..SyntheticShiftSpec::identity()
    }
}

pub fn affine_shift() -> SyntheticShiftSpec {
    SyntheticShiftSpec {
        linear: [[1.3, 0.4], [-0.2, 0.8]],
        translation: [4.0, -3.0],
        ..SyntheticShiftSpec::identity()
    }
}

pub fn desk_experiment(
    seed: u64,
    shift: Option<SyntheticShiftSpec>,
    representation: Representation,
) -> ExperimentConfig {
    ExperimentConfig {
        source: synthetic(100 + seed, None),
        target: synthetic(200 + seed, shift),
        net: desk_net(representation),
        train: desk_train(),
        seeds: Seeds {
            split: seed,
            init: seed,
            train: seed,
        },
        slide: 1,
    }
}

/// Largest per-coordinate relative error between `analytic` and central
/// finite differences of `f` at `base`. Pairs whose magnitudes sum below
/// 1e-6 are compared against that floor instead.
pub fn check_flat(base: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-6;
    assert_eq!(base.len(), analytic.len());
    let mut x = base.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        x[i] = base[i] + H;
        let up = f(&x);
        x[i] = base[i] - H;
        let down = f(&x);
        x[i] = base[i];
        let numeric = (up - down) / (2.0 * H);
        let err = (numeric - analytic[i]).abs() / (numeric.abs() + analytic[i].abs()).max(FLOOR);
        worst = worst.max(err);
    }
    worst
}

/// [`check_flat`] over every parameter of a network.
pub fn gradcheck<P>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> f64
where
    P: ParamSet<f64> + Clone,
{
    let mut probe = params.clone();
    check_flat(&params.to_flat(), &analytic.to_flat(), |x| {
        probe.set_flat(x);
        loss(&probe)
    })
}
