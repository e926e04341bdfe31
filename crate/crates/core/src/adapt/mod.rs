//! Training procedures: supervised source training, feature alignment,
//! offset alignment, target inference and the fine-tuning baseline.

mod batch;
mod finetune;
mod infer;
mod penalty;
mod source;
mod stage1;
mod stage2;

use serde::{Deserialize, Serialize};

pub use batch::{observed_windows, sample_indices, Batch};
pub use finetune::{finetune_baseline, pseudo_label_windows};
pub use infer::{infer_target, predict_windows, Variant};
pub use penalty::{
    critic_loss, critic_loss_and_grad, gradient_penalty, gradient_penalty_with_gammas, CriticLoss,
};
pub use source::train_source;
pub use stage1::stage1_align;
pub use stage2::stage2_align;

use crate::{Error, Result};

/// Optimisation hyperparameters. Every stage uses RMSprop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Critic learning rate (alpha).
    pub critic_lr: f64,
    /// Target encoder / offset adaptor learning rate (beta).
    pub generator_lr: f64,
    /// Gradient penalty coefficient (lambda).
    pub gp_coeff: f64,
    /// Batch size (m).
    pub batch_size: usize,
    /// Adversarial epochs (N) for both alignment stages.
    pub epochs: usize,
    /// Critic updates per adversarial epoch (n).
    pub critic_iters: usize,
    pub source_epochs: usize,
    pub source_lr: f64,
    /// Minibatch size of the supervised stages.
    pub source_batch_size: usize,
    /// Per-epoch multiplicative learning-rate decay for the supervised
    /// stages (source training and fine-tuning); 1 keeps the rate fixed.
    pub lr_decay: f64,
    /// Early-stopping patience on validation ADE; 0 disables it.
    pub patience: usize,
    pub finetune_epochs: usize,
    /// Not serialised: runs take it from their mandatory seed block.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            critic_lr: 5e-5,
            generator_lr: 5e-5,
            gp_coeff: 10.0,
            batch_size: 64,
            epochs: 500,
            critic_iters: 5,
            source_epochs: 200,
            source_lr: 1e-3,
            source_batch_size: 64,
            lr_decay: 1.0,
            patience: 20,
            finetune_epochs: 50,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("critic_lr", self.critic_lr),
            ("generator_lr", self.generator_lr),
            ("gp_coeff", self.gp_coeff),
            ("source_lr", self.source_lr),
        ];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay must be in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.batch_size == 0 || self.source_batch_size == 0 || self.critic_iters == 0 {
            return Err(Error::Config(
                "batch_size, source_batch_size and critic_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch traces of one training stage.
///
/// Adversarial stages fill `critic_loss`, `generator_loss` and
/// `w_distance` once per epoch. Supervised stages fill `generator_loss`
/// with the training loss and `val_ade` with the validation ADE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub critic_loss: Vec<f64>,
    pub generator_loss: Vec<f64>,
    /// Critic estimate `E[D(real)] - E[D(fake)]`.
    pub w_distance: Vec<f64>,
    pub val_ade: Vec<f64>,
    pub critic_updates: usize,
    pub generator_updates: usize,
    pub epochs_run: usize,
    pub seconds: f64,
}

#[derive(Serialize)]
struct EpochLine<'a> {
    stage: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    epoch: usize,
    critic_loss: Option<f64>,
    generator_loss: Option<f64>,
    w_distance: Option<f64>,
    val_ade: Option<f64>,
    timestamp: f64,
}

impl StageReport {
    pub(crate) fn new(stage: &str) -> Self {
        Self {
            stage: stage.into(),
            ..Default::default()
        }
    }

    /// One JSON object per epoch, newline separated.
    pub fn to_json_lines(&self, timestamp: f64, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        for epoch in 0..self.epochs_run {
            let line = EpochLine {
                stage: &self.stage,
                config_hash,
                epoch,
                critic_loss: self.critic_loss.get(epoch).copied(),
                generator_loss: self.generator_loss.get(epoch).copied(),
                w_distance: self.w_distance.get(epoch).copied(),
                val_ade: self.val_ade.get(epoch).copied(),
                timestamp,
            };
            out.push_str(&serde_json::to_string(&line).expect("serialisable"));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn stage_rng(seed: u64, salt: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn check_finite(stage: &'static str, epoch: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        log::error!("{stage}: {what} became {v} at epoch {epoch}");
        Err(Error::Training {
            stage,
            epoch,
            msg: format!("{what} is {v}"),
        })
    }
}

/// Attaches the stage and epoch to numeric failures raised mid-training.
pub(crate) fn at_epoch(stage: &'static str, epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric(msg) => {
            log::error!("{stage}: {msg} at epoch {epoch}");
            Error::Training { stage, epoch, msg }
        }
        other => other,
    }
}
