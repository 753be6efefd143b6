use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use super::model::{with_eos, Params, TinySeq2Seq};
use crate::pairs::TrainingPair;
use crate::rng;

/// How the summed target negative log-likelihood of a batch is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossNormalization {
    /// Divide by the number of target tokens (EOS included) in the batch.
    #[default]
    TokenMean,
    /// The raw sum over the batch.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Steps over which the learning rate ramps linearly from 0; constant after.
    pub warmup_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
    pub normalization: LossNormalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            warmup_steps: 100,
            epochs: 10,
            seed: 42,
            adam: AdamConfig::default(),
            clip_norm: Some(5.0),
            normalization: LossNormalization::TokenMean,
        }
    }
}

/// Optimizer settings used for full-scale pre-trained models. Kept for the
/// external scorer path; the warmup length was never published.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerPreset {
    pub name: &'static str,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lr_decay_per_iteration: Option<f64>,
    pub warmup: bool,
}

pub const BART_PRESET: OptimizerPreset =
    OptimizerPreset { name: "bart", learning_rate: 2e-5, batch_size: 64, lr_decay_per_iteration: None, warmup: true };

pub const BERT_PRESET: OptimizerPreset = OptimizerPreset {
    name: "bert",
    learning_rate: 1e-5,
    batch_size: 32,
    lr_decay_per_iteration: Some(0.05),
    warmup: false,
};

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainStats {
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: Option<f64>,
    pub steps: usize,
    /// Measured only when built with `std`.
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FineTuneStats {
    pub train: TrainStats,
    /// Tokens appended to the vocabulary before training.
    pub added_tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    NoPairs,
    InvalidConfig(String),
    Diverged { epoch: usize, step: usize, loss: f64 },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::NoPairs => f.write_str("no training pairs"),
            TrainError::InvalidConfig(m) => write!(f, "invalid training configuration: {m}"),
            TrainError::Diverged { epoch, step, loss } => {
                write!(f, "training diverged at epoch {epoch}, step {step} (loss {loss})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrainError {}

fn target_tokens(batch: &[&TrainingPair]) -> usize {
    batch.iter().map(|p| p.target.len() + 1).sum()
}

fn weight_for(normalization: LossNormalization, tokens: usize) -> f64 {
    match normalization {
        LossNormalization::TokenMean if tokens > 0 => 1.0 / tokens as f64,
        _ => 1.0,
    }
}

/// Training loss of a batch: the negative sum of EOS-terminated target
/// log-probabilities, normalized as requested. Empty batches have loss 0.
pub fn loss(model: &TinySeq2Seq, batch: &[TrainingPair], normalization: LossNormalization) -> f64 {
    let refs: Vec<&TrainingPair> = batch.iter().collect();
    let mut scratch = Params::zeros_like(model.params());
    batch_loss_and_grad(model, &refs, normalization, &mut scratch)
}

/// Loss and its gradient with respect to every parameter.
pub fn gradient(model: &TinySeq2Seq, batch: &[TrainingPair], normalization: LossNormalization) -> (f64, Params) {
    let refs: Vec<&TrainingPair> = batch.iter().collect();
    let mut grads = Params::zeros_like(model.params());
    let value = batch_loss_and_grad(model, &refs, normalization, &mut grads);
    (value, grads)
}

fn batch_loss_and_grad(
    model: &TinySeq2Seq,
    batch: &[&TrainingPair],
    normalization: LossNormalization,
    grads: &mut Params,
) -> f64 {
    let weight = weight_for(normalization, target_tokens(batch));
    batch
        .iter()
        .map(|pair| model.nll_and_grad(&pair.source, &with_eos(&pair.target), weight, grads))
        .sum()
}

struct Adam {
    config: AdamConfig,
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn new(params: &Params, config: AdamConfig) -> Self {
        Self { config, m: Params::zeros_like(params), v: Params::zeros_like(params), t: 0 }
    }

    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            for (((p, &g), m), v) in p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / (libm::sqrt(*v / c2) + epsilon);
            }
        }
    }
}

fn clip(grads: &mut Params, max_norm: f64) {
    let norm_sq: f64 = grads.tensors().iter().flat_map(|(_, m)| m.data.iter()).map(|g| g * g).sum();
    let norm = libm::sqrt(norm_sq);
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, m) in grads.tensors_mut() {
            m.data.iter_mut().for_each(|g| *g *= scale);
        }
    }
}

fn validate(config: &TrainConfig) -> Result<(), TrainError> {
    if !config.learning_rate.is_finite() || config.learning_rate <= 0.0 {
        return Err(TrainError::InvalidConfig(String::from("learning_rate must be > 0")));
    }
    if config.batch_size == 0 {
        return Err(TrainError::InvalidConfig(String::from("batch_size must be >= 1")));
    }
    Ok(())
}

/// Learning rate at optimizer step `step` (1-based).
pub fn scheduled_lr(config: &TrainConfig, step: usize) -> f64 {
    if config.warmup_steps == 0 || step >= config.warmup_steps {
        config.learning_rate
    } else {
        config.learning_rate * step as f64 / config.warmup_steps as f64
    }
}

/// Trains `model` in place with Adam and linear warmup. Pairs are reshuffled
/// every epoch from `config.seed`; the run is bitwise reproducible.
pub fn fit(model: &mut TinySeq2Seq, pairs: &[TrainingPair], config: &TrainConfig) -> Result<TrainStats, TrainError> {
    validate(config)?;
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    if config.epochs == 0 {
        return Ok(TrainStats::default());
    }
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();

    let mut adam = Adam::new(model.params(), config.adam);
    let mut grads = Params::zeros_like(model.params());
    let mut stats = TrainStats::default();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::seeded(rng::derive(config.seed, epoch as u64)));
        let mut epoch_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            grads.zero();
            let value = batch_loss_and_grad(model, &batch, config.normalization, &mut grads);
            stats.steps += 1;
            if !value.is_finite() {
                return Err(TrainError::Diverged { epoch, step: stats.steps, loss: value });
            }
            if let Some(max_norm) = config.clip_norm {
                clip(&mut grads, max_norm);
            }
            adam.step(model.params_mut(), &grads, scheduled_lr(config, stats.steps));
            epoch_sum += value;
            batches += 1;
        }
        stats.epoch_losses.push(epoch_sum / batches as f64);
    }
    stats.final_loss = stats.epoch_losses.last().copied();
    #[cfg(feature = "std")]
    {
        stats.wall_time_secs = Some(started.elapsed().as_secs_f64());
    }
    Ok(stats)
}

/// Continues training an already trained model on new pairs. Tokens the
/// model has never seen (new label words, new domain vocabulary) are first
/// appended to the shared vocabulary; nothing else about the architecture
/// changes. Zero epochs leave the model untouched.
pub fn fine_tune(
    model: &mut TinySeq2Seq,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<FineTuneStats, TrainError> {
    validate(config)?;
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    if config.epochs == 0 {
        return Ok(FineTuneStats::default());
    }
    let tokens = pairs.iter().flat_map(|p| p.source.iter().chain(&p.target));
    let added_tokens = model.extend_vocab(tokens, rng::derive(config.seed, 0xF1E7));
    let train = fit(model, pairs, config)?;
    Ok(FineTuneStats { train, added_tokens })
}
