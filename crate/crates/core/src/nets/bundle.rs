use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Adaptor, Critic, Decoder, Encoder, NetConfig, ParamSet, Stage};
use crate::{Error, Real, Result};

/// Every network of the pipeline plus the stages already trained.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub config: NetConfig,
    pub source_encoder: Encoder<T>,
    pub source_decoder: Decoder<T>,
    pub target_encoder: Encoder<T>,
    pub feature_critic: Critic<T>,
    pub offset_adaptor: Adaptor<T>,
    pub offset_critic: Critic<T>,
    /// Encoder/decoder pair of the fine-tuning baseline, once trained.
    pub finetuned: Option<(Encoder<T>, Decoder<T>)>,
    pub stages: Vec<Stage>,
}

impl<T: Real> ModelBundle<T> {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let source_encoder = Encoder::new(c.embed_dim, c.hidden_dim, &mut rng);
        let source_decoder = Decoder::new(
            c.embed_dim,
            c.hidden_dim,
            c.decoder_mlp_hidden,
            c.decoder_mlp_layers,
            &mut rng,
        );
        let target_encoder = Encoder::new(c.embed_dim, c.hidden_dim, &mut rng);
        let feature_critic = Critic::new(
            c.hidden_dim,
            c.critic_hidden,
            c.feature_critic_layers,
            &mut rng,
        );
        let offset_adaptor =
            Adaptor::new(c.ca_window, c.adaptor_hidden, c.adaptor_layers, &mut rng);
        let offset_critic = Critic::new(
            2 * c.ca_window,
            c.critic_hidden,
            c.offset_critic_layers,
            &mut rng,
        );
        Ok(Self {
            config,
            source_encoder,
            source_decoder,
            target_encoder,
            feature_critic,
            offset_adaptor,
            offset_critic,
            finetuned: None,
            stages: Vec::new(),
        })
    }

    pub fn has_stage(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn require(&self, stage: Stage) -> Result<()> {
        if self.has_stage(stage) {
            Ok(())
        } else {
            Err(Error::MissingStage(stage.name().into()))
        }
    }

    pub fn mark(&mut self, stage: Stage) {
        if !self.has_stage(stage) {
            self.stages.push(stage);
            self.stages.sort();
        }
    }

    /// Latest pipeline stage reached, ignoring the baseline.
    pub fn latest_stage(&self) -> Option<Stage> {
        self.stages
            .iter()
            .copied()
            .filter(|s| *s != Stage::BaselineFinetune)
            .max()
    }
}

impl<T: Real> ParamSet<T> for ModelBundle<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        use super::params::join;
        self.source_encoder
            .visit(&join(prefix, "source_encoder"), f);
        self.source_decoder
            .visit(&join(prefix, "source_decoder"), f);
        self.target_encoder
            .visit(&join(prefix, "target_encoder"), f);
        self.feature_critic
            .visit(&join(prefix, "feature_critic"), f);
        self.offset_adaptor
            .visit(&join(prefix, "offset_adaptor"), f);
        self.offset_critic.visit(&join(prefix, "offset_critic"), f);
        if let Some((enc, dec)) = &self.finetuned {
            enc.visit(&join(prefix, "finetune_encoder"), f);
            dec.visit(&join(prefix, "finetune_decoder"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        use super::params::join;
        self.source_encoder
            .visit_mut(&join(prefix, "source_encoder"), f);
        self.source_decoder
            .visit_mut(&join(prefix, "source_decoder"), f);
        self.target_encoder
            .visit_mut(&join(prefix, "target_encoder"), f);
        self.feature_critic
            .visit_mut(&join(prefix, "feature_critic"), f);
        self.offset_adaptor
            .visit_mut(&join(prefix, "offset_adaptor"), f);
        self.offset_critic
            .visit_mut(&join(prefix, "offset_critic"), f);
        if let Some((enc, dec)) = &mut self.finetuned {
            enc.visit_mut(&join(prefix, "finetune_encoder"), f);
            dec.visit_mut(&join(prefix, "finetune_decoder"), f);
        }
    }
}
