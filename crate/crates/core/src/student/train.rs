use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accumulate_gradient, sequence_ce_loss, FrameFeature, Gradient, StudentError, ToyModel};
use crate::provenance::Provenance;

pub const CHECKPOINT_FORMAT: &str = "roadscene-toy/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Sequences per update; 0 means the whole dataset.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 5, learning_rate: 20.0, batch_size: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Dataset loss before the first update.
    pub initial_loss: f64,
    /// Dataset loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub updates: usize,
}

impl TrainReport {
    /// Initial loss followed by every epoch's loss.
    pub fn trajectory(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss).chain(self.epoch_losses.iter().copied()).collect()
    }
}

/// Mean of the per-sequence losses over the dataset.
pub fn dataset_loss(model: &ToyModel, dataset: &[(FrameFeature, Vec<u32>)]) -> Result<f64, StudentError> {
    if dataset.is_empty() {
        return Err(StudentError::EmptyDataset);
    }
    let losses: Vec<f64> = dataset
        .par_iter()
        .map(|(f, t)| sequence_ce_loss(model, f, t))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / dataset.len() as f64)
}

fn batch_gradient(model: &ToyModel, batch: &[(FrameFeature, Vec<u32>)]) -> Result<Gradient, StudentError> {
    let scale = 1.0 / batch.len() as f64;
    if batch.len() == 1 {
        let mut g = Gradient::zeros_like(model);
        accumulate_gradient(model, &batch[0].0, &batch[0].1, scale, &mut g)?;
        return Ok(g);
    }
    let parts: Vec<Gradient> = batch
        .par_iter()
        .map(|(f, t)| {
            let mut g = Gradient::zeros_like(model);
            accumulate_gradient(model, f, t, scale, &mut g).map(|_| g)
        })
        .collect::<Result<_, _>>()?;
    let mut total = Gradient::zeros_like(model);
    for part in &parts {
        for (a, b) in total.token_table.iter_mut().zip(&part.token_table) {
            *a += b;
        }
        for (a, b) in total.frame_projection.iter_mut().zip(&part.frame_projection) {
            *a += b;
        }
    }
    Ok(total)
}

/// Gradient descent on the mean sequence loss, visiting the dataset in order.
pub fn train_sft(
    mut model: ToyModel,
    dataset: &[(FrameFeature, Vec<u32>)],
    config: &TrainConfig,
) -> Result<(ToyModel, TrainReport), StudentError> {
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(StudentError::BadLearningRate(config.learning_rate));
    }
    let initial_loss = dataset_loss(&model, dataset)?;
    if !initial_loss.is_finite() {
        return Err(StudentError::Diverged { epoch: 0, loss: initial_loss });
    }
    let batch = if config.batch_size == 0 { dataset.len() } else { config.batch_size };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut updates = 0;
    for epoch in 1..=config.epochs {
        for chunk in dataset.chunks(batch) {
            let g = batch_gradient(&model, chunk)?;
            updates += 1;
            if config.learning_rate == 0.0 {
                continue;
            }
            for (w, d) in model.token_table.iter_mut().zip(&g.token_table) {
                *w -= config.learning_rate * d;
            }
            for (w, d) in model.frame_projection.iter_mut().zip(&g.frame_projection) {
                *w -= config.learning_rate * d;
            }
        }
        let loss = dataset_loss(&model, dataset)?;
        if !loss.is_finite() || !model.is_finite() {
            return Err(StudentError::Diverged { epoch, loss });
        }
        epoch_losses.push(loss);
    }
    Ok((model, TrainReport { initial_loss, epoch_losses, updates }))
}

/// Argmax chain from BOS; ties go to the lowest id. Stops after EOS (not emitted) or `max_len` tokens.
pub fn greedy_decode(model: &ToyModel, feature: &FrameFeature, max_len: usize) -> Result<Vec<u32>, StudentError> {
    let mut out = Vec::new();
    let mut prev = model.bos_id;
    let base = {
        model.check_feature(feature)?;
        model.check_token(prev)?;
        model.feature_logits(feature)
    };
    while out.len() < max_len {
        let z = model.logits_with(&base, prev);
        let mut best = 0;
        for (k, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = k;
            }
        }
        let next = best as u32;
        if Some(next) == model.eos_id {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    provenance: Option<Provenance>,
    model: ToyModel,
}

pub fn save_checkpoint(path: &Path, model: &ToyModel, provenance: Option<&Provenance>) -> Result<(), StudentError> {
    let ck = Checkpoint { format: CHECKPOINT_FORMAT.into(), provenance: provenance.cloned(), model: model.clone() };
    let mut text = serde_json::to_string(&ck).map_err(|e| StudentError::Checkpoint(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ToyModel, Option<Provenance>), StudentError> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| StudentError::Checkpoint(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(StudentError::Checkpoint(format!("unsupported format {}", ck.format)));
    }
    let m = &ck.model;
    if m.token_table.len() != m.vocab_size * m.vocab_size || m.frame_projection.len() != m.feature_dim * m.vocab_size {
        return Err(StudentError::Checkpoint("parameter shapes do not match vocab_size/feature_dim".into()));
    }
    Ok((ck.model, ck.provenance))
}

/// Writes `epoch<TAB>mean_loss` rows, epoch 0 being the initial loss.
pub fn write_trajectory(path: &Path, report: &TrainReport) -> std::io::Result<()> {
    let mut out = String::from("epoch\tmean_loss\n");
    for (e, loss) in report.trajectory().iter().enumerate() {
        out.push_str(&format!("{e}\t{loss}\n"));
    }
    std::fs::write(path, out)
}
