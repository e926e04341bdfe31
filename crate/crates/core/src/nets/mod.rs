//! The parameterised networks: encoders, decoder, critics and offset
//! adaptor, each with explicit forward and backward passes.

mod adaptor;
mod bundle;
pub mod checkpoint;
mod critic;
mod decoder;
mod dense;
mod encoder;
mod lstm;
mod params;
pub mod seq;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use adaptor::{adapt_offsets, Adaptor, AdaptorCache};
pub use bundle::ModelBundle;
pub use critic::{critic_score, Critic, CriticEval, InputGradients};
pub use decoder::{decode, Decoder, DecoderCache};
pub use dense::{Dense, Mlp, MlpCache};
pub use encoder::{encode, Encoder, EncoderCache};
pub use lstm::{LstmCell, LstmStepCache};
pub use params::ParamSet;

use crate::{Error, Result};

/// What the decoder, adaptor and offset critic operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Per-step displacements.
    #[default]
    Offset,
    /// Absolute coordinates (ablation).
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub obs_len: usize,
    pub fut_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub decoder_mlp_layers: usize,
    pub decoder_mlp_hidden: usize,
    pub adaptor_layers: usize,
    pub adaptor_hidden: usize,
    pub offset_critic_layers: usize,
    pub feature_critic_layers: usize,
    pub critic_hidden: usize,
    /// Steps per adaptor chunk and per offset-critic sample.
    pub ca_window: usize,
    pub representation: Representation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            obs_len: 8,
            fut_len: 12,
            embed_dim: 32,
            hidden_dim: 512,
            decoder_mlp_layers: 3,
            decoder_mlp_hidden: 128,
            adaptor_layers: 2,
            adaptor_hidden: 64,
            offset_critic_layers: 10,
            feature_critic_layers: 5,
            critic_hidden: 128,
            ca_window: 6,
            representation: Representation::Offset,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("obs_len", self.obs_len),
            ("fut_len", self.fut_len),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("decoder_mlp_layers", self.decoder_mlp_layers),
            ("decoder_mlp_hidden", self.decoder_mlp_hidden),
            ("adaptor_layers", self.adaptor_layers),
            ("adaptor_hidden", self.adaptor_hidden),
            ("offset_critic_layers", self.offset_critic_layers),
            ("feature_critic_layers", self.feature_critic_layers),
            ("critic_hidden", self.critic_hidden),
            ("ca_window", self.ca_window),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.obs_len < 2 {
            return Err(Error::Config("obs_len must be at least 2".into()));
        }
        if self.ca_window > self.fut_len || self.ca_window > self.observed_steps() {
            return Err(Error::Config(format!(
                "ca_window {} exceeds fut_len {} or the {} observed steps",
                self.ca_window,
                self.fut_len,
                self.observed_steps()
            )));
        }
        if !self.fut_len.is_multiple_of(self.ca_window) {
            return Err(Error::Config(format!(
                "fut_len {} is not a multiple of ca_window {}",
                self.fut_len, self.ca_window
            )));
        }
        Ok(())
    }

    /// Observed steps in the representation: `obs_len - 1` offsets or
    /// `obs_len` coordinates.
    pub fn observed_steps(&self) -> usize {
        match self.representation {
            Representation::Offset => self.obs_len - 1,
            Representation::Coordinate => self.obs_len,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serialisable");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

/// Training stages in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    TrainSource,
    AdaptFeature,
    AdaptOffset,
    BaselineFinetune,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::TrainSource => "train-source",
            Stage::AdaptFeature => "adapt-feature",
            Stage::AdaptOffset => "adapt-offset",
            Stage::BaselineFinetune => "baseline-finetune",
        }
    }

    /// The stage that must have completed before this one may run.
    pub fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::TrainSource => None,
            Stage::AdaptFeature => Some(Stage::TrainSource),
            Stage::AdaptOffset => Some(Stage::AdaptFeature),
            Stage::BaselineFinetune => Some(Stage::TrainSource),
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
