//! A tiny frame-conditioned next-token model trained with per-sequence cross-entropy.
//!
//! Logits for the token after `prev` are `token_table[prev] + feature · frame_projection`.
//! Logits are linear in the parameters, so the loss is convex and its
//! gradient has a closed form.

mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FrameSequence;

pub use train::{
    dataset_loss, greedy_decode, load_checkpoint, save_checkpoint, train_sft, write_trajectory, TrainConfig,
    TrainReport, CHECKPOINT_FORMAT,
};

/// Length of [`FrameFeature::values`].
pub const FEATURE_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum StudentError {
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("feature has {got} values, model expects {expected}")]
    FeatureDim { got: usize, expected: usize },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("learning rate must be finite and >= 0, got {0}")]
    BadLearningRate(f64),
    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeature {
    pub clip_id: String,
    pub values: Vec<f64>,
}

impl FrameFeature {
    /// L2-normalizes `values`; an all-zero vector becomes the uniform unit vector.
    pub fn from_values(clip_id: impl Into<String>, mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            values.iter_mut().for_each(|v| *v /= norm);
        } else if !values.is_empty() {
            let u = 1.0 / (values.len() as f64).sqrt();
            values.iter_mut().for_each(|v| *v = u);
        }
        Self { clip_id: clip_id.into(), values }
    }

    /// Per-channel means of the upper and lower halves plus mean absolute
    /// change between consecutive frames in each half, pooled over the clip.
    pub fn from_frames(frames: &FrameSequence) -> Self {
        let mut acc = [0.0f64; FEATURE_DIM];
        let side = crate::ingest::FRAME_SIDE;
        let half = side / 2;
        for (k, frame) in frames.frames().iter().enumerate() {
            for (x, y, p) in frame.enumerate_pixels() {
                let band = usize::from(y >= half);
                for c in 0..3 {
                    acc[band * 3 + c] += f64::from(p[c]);
                }
                if k > 0 {
                    let q = frames.frames()[k - 1].get_pixel(x, y);
                    let diff: f64 = (0..3).map(|c| (f64::from(p[c]) - f64::from(q[c])).abs()).sum();
                    acc[6 + band] += diff;
                }
            }
        }
        let pixels = f64::from(side * half);
        let n = frames.len() as f64;
        for v in &mut acc[..6] {
            *v /= pixels * n * 255.0;
        }
        for v in &mut acc[6..] {
            *v /= pixels * (n - 1.0).max(1.0) * 3.0 * 255.0;
        }
        Self::from_values(frames.clip_id(), acc.to_vec())
    }
}

/// Parameters: `token_table` is V×V (row = previous token), `frame_projection`
/// is F×V, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub token_table: Vec<f64>,
    pub frame_projection: Vec<f64>,
    pub bos_id: u32,
    pub eos_id: Option<u32>,
}

impl ToyModel {
    pub fn zeros(vocab_size: usize, feature_dim: usize, bos_id: u32, eos_id: Option<u32>) -> Self {
        Self {
            vocab_size,
            feature_dim,
            token_table: vec![0.0; vocab_size * vocab_size],
            frame_projection: vec![0.0; feature_dim * vocab_size],
            bos_id,
            eos_id,
        }
    }

    /// Parameters drawn uniformly from `[-scale, scale)`.
    pub fn random(vocab_size: usize, feature_dim: usize, bos_id: u32, eos_id: Option<u32>, scale: f64, seed: u64) -> Self {
        let mut m = Self::zeros(vocab_size, feature_dim, bos_id, eos_id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in m.token_table.iter_mut().chain(m.frame_projection.iter_mut()) {
            *w = scale * (2.0 * rng.random::<f64>() - 1.0);
        }
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.token_table.len() + self.frame_projection.len()
    }

    pub fn is_finite(&self) -> bool {
        self.token_table.iter().chain(&self.frame_projection).all(|w| w.is_finite())
    }

    fn check_token(&self, id: u32) -> Result<(), StudentError> {
        if (id as usize) < self.vocab_size {
            Ok(())
        } else {
            Err(StudentError::TokenOutOfRange { id, vocab_size: self.vocab_size })
        }
    }

    fn check_feature(&self, feature: &FrameFeature) -> Result<(), StudentError> {
        if feature.values.len() == self.feature_dim {
            Ok(())
        } else {
            Err(StudentError::FeatureDim { got: feature.values.len(), expected: self.feature_dim })
        }
    }

    /// Validates `tokens` and the feature for loss and gradient evaluation.
    fn check_example(&self, feature: &FrameFeature, tokens: &[u32]) -> Result<(), StudentError> {
        self.check_feature(feature)?;
        if tokens.is_empty() {
            return Err(StudentError::EmptySequence);
        }
        self.check_token(self.bos_id)?;
        tokens.iter().try_for_each(|&t| self.check_token(t))
    }

    /// `feature · frame_projection`, shared by every position of a sequence.
    fn feature_logits(&self, feature: &FrameFeature) -> Vec<f64> {
        let v = self.vocab_size;
        let mut out = vec![0.0; v];
        for (f, &x) in feature.values.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in out.iter_mut().zip(&self.frame_projection[f * v..(f + 1) * v]) {
                    *o += x * w;
                }
            }
        }
        out
    }

    fn logits_with(&self, base: &[f64], prev: u32) -> Vec<f64> {
        let v = self.vocab_size;
        let row = &self.token_table[prev as usize * v..(prev as usize + 1) * v];
        row.iter().zip(base).map(|(a, b)| a + b).collect()
    }
}

pub fn forward_logits(model: &ToyModel, feature: &FrameFeature, prefix_token: u32) -> Result<Vec<f64>, StudentError> {
    model.check_feature(feature)?;
    model.check_token(prefix_token)?;
    Ok(model.logits_with(&model.feature_logits(feature), prefix_token))
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at(z: &[f64], k: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    z[k] - max - lse
}

/// Mean negative log-likelihood of `tokens`, the first conditioned on BOS.
pub fn sequence_ce_loss(model: &ToyModel, feature: &FrameFeature, tokens: &[u32]) -> Result<f64, StudentError> {
    model.check_example(feature, tokens)?;
    let base = model.feature_logits(feature);
    let mut prev = model.bos_id;
    let mut total = 0.0;
    for &y in tokens {
        let z = model.logits_with(&base, prev);
        total -= log_softmax_at(&z, y as usize);
        prev = y;
    }
    Ok(total / tokens.len() as f64)
}

/// Gradient with the same layout as [`ToyModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub token_table: Vec<f64>,
    pub frame_projection: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(model: &ToyModel) -> Self {
        Self {
            token_table: vec![0.0; model.token_table.len()],
            frame_projection: vec![0.0; model.frame_projection.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.token_table.iter().chain(&self.frame_projection).fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Adds `scale` times the gradient of one sequence's loss into `grad`; returns that loss.
pub(crate) fn accumulate_gradient(
    model: &ToyModel,
    feature: &FrameFeature,
    tokens: &[u32],
    scale: f64,
    grad: &mut Gradient,
) -> Result<f64, StudentError> {
    model.check_example(feature, tokens)?;
    let v = model.vocab_size;
    let inv_l = 1.0 / tokens.len() as f64;
    let base = model.feature_logits(feature);
    let mut prev = model.bos_id;
    let mut loss = 0.0;
    for &y in tokens {
        let z = model.logits_with(&base, prev);
        let mut p = softmax(&z);
        loss -= log_softmax_at(&z, y as usize);
        p[y as usize] -= 1.0;
        let row = &mut grad.token_table[prev as usize * v..(prev as usize + 1) * v];
        for (g, d) in row.iter_mut().zip(&p) {
            *g += scale * inv_l * d;
        }
        for (f, &x) in feature.values.iter().enumerate() {
            if x != 0.0 {
                for (g, d) in grad.frame_projection[f * v..(f + 1) * v].iter_mut().zip(&p) {
                    *g += scale * inv_l * x * d;
                }
            }
        }
        prev = y;
    }
    Ok(loss * inv_l)
}

/// Analytic gradient of [`sequence_ce_loss`]: per position, `(p - onehot(y)) / L`
/// lands in the previous token's row and `feature ⊗ (p - onehot(y)) / L` in the projection.
pub fn loss_gradient(model: &ToyModel, feature: &FrameFeature, tokens: &[u32]) -> Result<Gradient, StudentError> {
    let mut g = Gradient::zeros_like(model);
    accumulate_gradient(model, feature, tokens, 1.0, &mut g)?;
    Ok(g)
}
