use serde::{Deserialize, Serialize};

use super::batch::{to_coordinates, Batch};
use crate::nets::{seq, Adaptor, Decoder, Encoder, ModelBundle, Representation, Stage};
use crate::traj_data::{Point, TrajectoryWindow};
use crate::{Error, Real, Result};

const CHUNK: usize = 512;

/// The model variants compared on the target domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Source encoder and decoder.
    #[serde(rename = "SO")]
    SourceOnly,
    /// Target encoder with the source decoder.
    #[serde(rename = "TE")]
    TargetEncoder,
    /// Target encoder, source decoder and offset adaptor.
    #[serde(rename = "TO")]
    TargetOffset,
    /// Fine-tuned source encoder and decoder.
    #[serde(rename = "F-T")]
    Finetune,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SourceOnly,
        Variant::TargetEncoder,
        Variant::TargetOffset,
        Variant::Finetune,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::SourceOnly => "SO",
            Variant::TargetEncoder => "TE",
            Variant::TargetOffset => "TO",
            Variant::Finetune => "F-T",
        }
    }

    pub fn required_stage(self) -> Stage {
        match self {
            Variant::SourceOnly => Stage::TrainSource,
            Variant::TargetEncoder => Stage::AdaptFeature,
            Variant::TargetOffset => Stage::AdaptOffset,
            Variant::Finetune => Stage::BaselineFinetune,
        }
    }
}

/// Future coordinates predicted autoregressively for every window.
pub(crate) fn predict_with<T: Real>(
    encoder: &Encoder<T>,
    decoder: &Decoder<T>,
    adaptor: Option<&Adaptor<T>>,
    windows: &[TrajectoryWindow],
    repr: Representation,
) -> Result<Vec<Vec<Point>>> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(CHUNK) {
        let refs: Vec<&TrajectoryWindow> = chunk.iter().collect();
        let steps = chunk[0].fut.len();
        let (obs, seed) = Batch::<T>::inputs(&refs, repr)?;
        let (feature, _) = encoder.forward(&obs);
        let (mut pred, _) = decoder.forward(&feature, &seed, steps, None)?;
        if let Some(a) = adaptor {
            pred = a.forward(&pred)?.0;
        }
        for (w, steps) in chunk.iter().zip(seq::unstack(&pred)) {
            out.push(to_coordinates(w.last_obs(), &steps, repr));
        }
    }
    Ok(out)
}

/// Predictions of one model variant; errors if its stage has not run.
pub fn predict_windows<T: Real>(
    nets: &ModelBundle<T>,
    variant: Variant,
    windows: &[TrajectoryWindow],
) -> Result<Vec<Vec<Point>>> {
    nets.require(variant.required_stage())?;
    let repr = nets.config.representation;
    match variant {
        Variant::SourceOnly => predict_with(
            &nets.source_encoder,
            &nets.source_decoder,
            None,
            windows,
            repr,
        ),
        Variant::TargetEncoder => predict_with(
            &nets.target_encoder,
            &nets.source_decoder,
            None,
            windows,
            repr,
        ),
        Variant::TargetOffset => predict_with(
            &nets.target_encoder,
            &nets.source_decoder,
            Some(&nets.offset_adaptor),
            windows,
            repr,
        ),
        Variant::Finetune => {
            let (enc, dec) = nets
                .finetuned
                .as_ref()
                .ok_or_else(|| Error::MissingStage(Stage::BaselineFinetune.name().into()))?;
            predict_with(enc, dec, None, windows, repr)
        }
    }
}

/// Full adapted inference for one target observation: target encoder,
/// source decoder, offset adaptor, then reconstruction from the last
/// observed point.
pub fn infer_target<T: Real>(obs: &[Point], nets: &ModelBundle<T>) -> Result<Vec<Point>> {
    for stage in [Stage::TrainSource, Stage::AdaptFeature, Stage::AdaptOffset] {
        nets.require(stage)?;
    }
    if obs.len() != nets.config.obs_len {
        return Err(Error::Shape(format!(
            "expected {} observed points, got {}",
            nets.config.obs_len,
            obs.len()
        )));
    }
    let window = TrajectoryWindow {
        ped_id: 0,
        start_frame: 0,
        obs: obs.to_vec(),
        fut: vec![[0.0, 0.0]; nets.config.fut_len],
    };
    Ok(predict_windows(nets, Variant::TargetOffset, std::slice::from_ref(&window))?.remove(0))
}
