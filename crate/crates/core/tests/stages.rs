//! Behaviour of the training stages, inference and the fine-tuning
//! baseline on desk-scale synthetic data.

mod common;

use std::sync::OnceLock;

use common::{desk_experiment, desk_train, speed_shift};
use ctp_core::adapt::{
    critic_loss_and_grad, finetune_baseline, infer_target, predict_windows, pseudo_label_windows,
    stage1_align, stage2_align, train_source, TrainingConfig, Variant,
};
use ctp_core::nets::{adapt_offsets, decode, encode, Critic, ParamSet};
use ctp_core::optim::RmsProp;
use ctp_core::traj_data::{from_offsets, make_split, Domain, SyntheticShiftSpec};
use ctp_core::{DomainSplit, Error, ModelBundle, Point, Representation, Stage, TrajectoryWindow};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source-trained bundle and a split whose target shares the source
/// distribution (a different draw of pedestrians).
fn source_trained() -> &'static (DomainSplit, ModelBundle<f32>) {
    static CELL: OnceLock<(DomainSplit, ModelBundle<f32>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = desk_experiment(0, None, Representation::Offset);
        let split = cfg.build_split().unwrap();
        let mut bundle = ModelBundle::new(cfg.net.clone(), 0).unwrap();
        train_source(&split, &mut bundle, &cfg.training()).unwrap();
        (split, bundle)
    })
}

/// The fixture's split with its target partitions replaced.
fn with_target(shift: Option<SyntheticShiftSpec>) -> DomainSplit {
    let cfg = desk_experiment(0, shift, Representation::Offset);
    let (lo, lf) = (cfg.net.obs_len, cfg.net.fut_len);
    let target = cfg.target.load(lo, lf, 1).unwrap();
    let part = make_split(&target, Domain::Target, 1).unwrap();
    let mut split = source_trained().0.clone();
    split.target_train = part.first;
    split.target_test = part.second;
    split
}

fn adversarial(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        ..desk_train()
    }
}

fn step_length(seqs: &[Vec<Point>], starts: &[Point]) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (s, start) in seqs.iter().zip(starts) {
        let mut prev = *start;
        for p in s {
            total += (p[0] - prev[0]).hypot(p[1] - prev[1]);
            prev = *p;
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn source_training_is_deterministic() {
    let cfg = desk_experiment(3, None, Representation::Offset);
    let split = cfg.build_split().unwrap();
    let train = TrainingConfig {
        source_epochs: 5,
        ..cfg.training()
    };
    let run = || {
        let mut b = ModelBundle::<f32>::new(cfg.net.clone(), 3).unwrap();
        let report = train_source(&split, &mut b, &train).unwrap();
        (b.fingerprint(), report.generator_loss)
    };
    assert_eq!(run(), run());
}

#[test]
fn source_training_reports_and_marks() {
    let (_, bundle) = source_trained();
    assert!(bundle.has_stage(Stage::TrainSource));
    assert!(!bundle.has_stage(Stage::AdaptFeature));
}

#[test]
fn stage1_single_step_accounting() {
    let (split, trained) = source_trained();
    let mut b = trained.clone();
    let cfg = TrainingConfig {
        critic_iters: 1,
        epochs: 1,
        batch_size: 1,
        ..desk_train()
    };
    let r = stage1_align(split, &mut b, &cfg).unwrap();
    assert_eq!((r.critic_updates, r.generator_updates), (1, 1));
    assert_eq!(r.w_distance.len(), 1);
    assert_eq!(r.critic_loss.len(), r.epochs_run);
    assert_eq!(r.generator_loss.len(), r.epochs_run);
}

#[test]
fn stage_accounting_and_frozen_parameters() {
    let (_, trained) = source_trained();
    let split = with_target(Some(speed_shift()));
    let mut b = trained.clone();
    let cfg = TrainingConfig {
        critic_iters: 3,
        epochs: 7,
        batch_size: 4,
        ..desk_train()
    };
    let se = b.source_encoder.fingerprint();
    let sd = b.source_decoder.fingerprint();
    let r1 = stage1_align(&split, &mut b, &cfg).unwrap();
    assert_eq!((r1.critic_updates, r1.generator_updates), (21, 7));
    let te = b.target_encoder.fingerprint();
    assert_ne!(te, se, "stage 1 should move the target encoder");
    let r2 = stage2_align(&split, &mut b, &cfg).unwrap();
    assert_eq!((r2.critic_updates, r2.generator_updates), (21, 7));
    assert_eq!(r2.w_distance.len(), 7);
    assert_eq!(b.source_encoder.fingerprint(), se);
    assert_eq!(b.source_decoder.fingerprint(), sd);
    assert_eq!(b.target_encoder.fingerprint(), te);
}

#[test]
fn stage1_identity_shift_stays_aligned() {
    let (split, trained) = source_trained();
    let mut b = trained.clone();
    let r = stage1_align(split, &mut b, &adversarial(400)).unwrap();
    let worst = r.w_distance.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    assert!(worst < 0.5, "max |W| = {worst}");
    let se = b.source_encoder.to_flat();
    let te = b.target_encoder.to_flat();
    let diff: f32 = se
        .iter()
        .zip(&te)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f32>()
        .sqrt();
    let norm: f32 = se.iter().map(|a| a * a).sum::<f32>().sqrt();
    assert!(diff / norm < 0.1, "relative drift {}", diff / norm);
}

#[test]
fn stage2_identity_shift_keeps_adaptor_near_identity() {
    let (split, trained) = source_trained();
    let mut b = trained.clone();
    let cfg = adversarial(400);
    stage1_align(split, &mut b, &cfg).unwrap();
    stage2_align(split, &mut b, &cfg).unwrap();
    let raw = predict_windows(&b, Variant::TargetEncoder, &split.target_test).unwrap();
    let mut dev = 0.0;
    let mut n = 0;
    for (w, coords) in split.target_test.iter().zip(&raw) {
        let offsets = ctp_core::traj_data::to_offsets(&[&[w.last_obs()][..], coords].concat())
            .unwrap()
            .offsets;
        let adapted = adapt_offsets(&b.offset_adaptor.clone(), &offsets).unwrap();
        for (a, o) in adapted.iter().zip(&offsets) {
            dev += (a[0] - o[0]).hypot(a[1] - o[1]);
            n += 1;
        }
    }
    let mean = dev / n as f64;
    assert!(mean < 0.05, "mean per-step deviation {mean}");
}

#[test]
fn stage2_moves_step_length_toward_target() {
    let (_, trained) = source_trained();
    let shift = SyntheticShiftSpec {
        speed_scale: 2.0,
        ..SyntheticShiftSpec::identity()
    };
    let split = with_target(Some(shift));
    let mut b = trained.clone();
    let cfg = adversarial(400);
    stage1_align(&split, &mut b, &cfg).unwrap();
    stage2_align(&split, &mut b, &cfg).unwrap();
    let starts: Vec<Point> = split.target_test.iter().map(|w| w.last_obs()).collect();
    let gts: Vec<Vec<Point>> = split.target_test.iter().map(|w| w.fut.clone()).collect();
    let before = predict_windows(&b, Variant::TargetEncoder, &split.target_test).unwrap();
    let after = predict_windows(&b, Variant::TargetOffset, &split.target_test).unwrap();
    let truth = step_length(&gts, &starts);
    let (lb, la) = (step_length(&before, &starts), step_length(&after, &starts));
    assert!(
        (la - truth).abs() < (lb - truth).abs(),
        "truth {truth:.3} unadapted {lb:.3} adapted {la:.3}"
    );
}

#[test]
fn critic_learns_the_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut critic = Critic::<f64>::new(4, 16, 3, &mut rng);
    let source = Array2::from_shape_fn((32, 4), |_| 1.0 + rng.random_range(-0.2..0.2));
    let target = Array2::from_shape_fn((32, 4), |_| -1.0 + rng.random_range(-0.2..0.2));
    let mut opt = RmsProp::new(1e-3);
    for _ in 0..200 {
        let gammas: Vec<f64> = (0..32).map(|_| rng.random()).collect();
        let mut grad = critic.zeros_like();
        critic_loss_and_grad(&critic, &source, &target, 10.0, &gammas, &mut grad).unwrap();
        opt.step(&mut critic, &grad);
    }
    let ds = critic.scores(&source).unwrap().mean().unwrap();
    let dt = critic.scores(&target).unwrap().mean().unwrap();
    assert!(ds > dt, "D(source) {ds} vs D(target) {dt}");
}

#[test]
fn missing_prerequisites_are_named() {
    let (split, _) = source_trained();
    let cfg = desk_experiment(0, None, Representation::Offset);
    let mut fresh = ModelBundle::<f32>::new(cfg.net, 0).unwrap();
    match stage1_align(split, &mut fresh, &desk_train()) {
        Err(Error::MissingStage(s)) => assert_eq!(s, "train-source"),
        other => panic!("unexpected {other:?}"),
    }
    let mut trained = source_trained().1.clone();
    match stage2_align(split, &mut trained, &desk_train()) {
        Err(Error::MissingStage(s)) => assert_eq!(s, "adapt-feature"),
        other => panic!("unexpected {other:?}"),
    }
    match infer_target(&split.target_test[0].obs, &trained) {
        Err(Error::MissingStage(s)) => assert_eq!(s, "adapt-feature"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_target_is_rejected() {
    let (split, trained) = source_trained();
    let mut split = split.clone();
    split.target_train.clear();
    let mut b = trained.clone();
    assert!(matches!(
        stage1_align(&split, &mut b, &desk_train()),
        Err(Error::Split(_))
    ));
    assert!(matches!(
        finetune_baseline(&split, &mut b, &desk_train()),
        Err(Error::Split(_))
    ));
}

#[test]
fn divergence_names_the_epoch() {
    let (split, trained) = source_trained();
    let mut b = trained.clone();
    let mut flat = b.source_encoder.to_flat();
    flat[0] = f32::NAN;
    b.source_encoder.set_flat(&flat);
    match stage1_align(split, &mut b, &adversarial(3)) {
        Err(Error::Training { stage, epoch, .. }) => {
            assert_eq!((stage, epoch), ("adapt-feature", 0))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn inference_contract() {
    let (split, trained) = source_trained();
    let mut b = trained.clone();
    stage1_align(split, &mut b, &adversarial(20)).unwrap();
    // Identity adaptor: TO must equal TE exactly.
    b.mark(Stage::AdaptOffset);
    let te = predict_windows(&b, Variant::TargetEncoder, &split.target_test).unwrap();
    let to = predict_windows(&b, Variant::TargetOffset, &split.target_test).unwrap();
    assert_eq!(te, to);

    stage2_align(split, &mut b, &adversarial(20)).unwrap();
    let lf = b.config.fut_len;
    for w in split.target_test.iter().take(5) {
        let pred = infer_target(&w.obs, &b).unwrap();
        let feature = encode(&b.target_encoder, &w.obs).unwrap();
        let offsets = decode(&b.source_decoder, &feature, w.seed_offset(), lf, None).unwrap();
        let adapted = adapt_offsets(&b.offset_adaptor, &offsets).unwrap();
        let manual = from_offsets(w.last_obs(), &adapted);
        assert_eq!(pred.len(), lf);
        for (p, m) in pred.iter().zip(&manual[1..]) {
            assert!(
                (p[0] - m[0]).abs() < 1e-5 && (p[1] - m[1]).abs() < 1e-5,
                "{p:?} vs {m:?}"
            );
        }
        let first = [
            w.last_obs()[0] + adapted[0][0],
            w.last_obs()[1] + adapted[0][1],
        ];
        assert!((pred[0][0] - first[0]).abs() < 1e-5 && (pred[0][1] - first[1]).abs() < 1e-5);
    }
}

#[test]
fn pseudo_labels_split_observations_in_half() {
    let w = TrajectoryWindow {
        ped_id: 3,
        start_frame: 40,
        obs: (0..8).map(|k| [k as f64, 0.0]).collect(),
        fut: vec![[99.0, 99.0]; 12],
    };
    let p = pseudo_label_windows(std::slice::from_ref(&w)).unwrap();
    assert_eq!(p[0].obs, w.obs[..4].to_vec());
    assert_eq!(p[0].fut, w.obs[4..].to_vec());
    assert!(p[0].all_points().all(|q| q[0] < 99.0));
}

#[test]
fn finetune_reduces_pseudo_label_loss() {
    let (_, trained) = source_trained();
    let split = with_target(Some(speed_shift()));
    let mut b = trained.clone();
    let cfg = TrainingConfig {
        finetune_epochs: 30,
        ..desk_train()
    };
    let (report, eval) = finetune_baseline(&split, &mut b, &cfg).unwrap();
    let first = report.generator_loss[0];
    let last = *report.generator_loss.last().unwrap();
    assert!(last < first, "loss {first} -> {last}");
    assert_eq!(eval.n_windows, split.target_test.len());
    assert!(b.has_stage(Stage::BaselineFinetune));
    let preds = predict_windows(&b, Variant::Finetune, &split.target_test).unwrap();
    assert_eq!(preds.len(), split.target_test.len());
}
