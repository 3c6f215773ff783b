use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::EmbeddingTable;
use super::model::{EncodedTranscript, ModelParams};
use crate::data::inverse_frequency_weights;
use crate::types::{N_SECTIONS, N_SPEAKERS};
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_transcripts: usize,
    pub tbptt_len: usize,
    /// One rate per epoch.
    pub dropout_schedule: Vec<f64>,
    pub grad_clip: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch_transcripts: 4,
            tbptt_len: 64,
            dropout_schedule: vec![0.45, 0.30, 0.25, 0.22, 0.21],
            grad_clip: 5.0,
            epochs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dropout_schedule.len() != self.epochs {
            return Err(Error::InvalidInput(format!(
                "dropout schedule has {} entries for {} epochs",
                self.dropout_schedule.len(),
                self.epochs
            )));
        }
        if self.dropout_schedule.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidInput("dropout rates must lie in [0, 1)".into()));
        }
        if self.batch_transcripts == 0 || self.tbptt_len == 0 {
            return Err(Error::InvalidInput("batch size and truncation length must be positive".into()));
        }
        if !(self.lr >= 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::InvalidInput("lr must be >= 0 and grad_clip > 0".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Rescale `grad` so its L2 norm is at most `max_norm`. Returns `(norm, scale)`.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> (f64, f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = if norm > max_norm { max_norm / norm } else { 1.0 };
    if scale < 1.0 {
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    (norm, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub clip_scale: f64,
    /// Norm of the gradient handed to the optimizer.
    pub applied_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per utterance for each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

fn batch_weights(batch: &[&EncodedTranscript]) -> (Vec<f64>, Vec<f64>) {
    let mut soap = [0.0; N_SECTIONS];
    let mut speaker = [0.0; N_SPEAKERS];
    for t in batch {
        for s in &t.soap {
            soap.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
        for s in &t.speaker {
            speaker.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }
    (inverse_frequency_weights(&soap), inverse_frequency_weights(&speaker))
}

/// Mini-batch training. Per-transcript gradients are computed in parallel and
/// summed in transcript order, so results do not depend on the thread count.
pub fn train(params: &mut ModelParams, table: &EmbeddingTable, data: &[EncodedTranscript], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("no training transcripts".into()));
    }
    let root = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = Adam::new(params.n_params(), cfg.lr);
    let mut flat = params.flat();
    let mut report = TrainReport::default();
    let total_utts: usize = data.iter().map(EncodedTranscript::len).sum();

    for (epoch, &rate) in cfg.dropout_schedule.iter().enumerate() {
        let mut epoch_rng = root.split(epoch as u64);
        epoch_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_transcripts).enumerate() {
            let batch: Vec<&EncodedTranscript> = chunk.iter().map(|&i| &data[i]).collect();
            let (sw, kw) = batch_weights(&batch);
            let results: Vec<Result<(f64, ModelParams)>> = chunk
                .par_iter()
                .map(|&i| {
                    let mut rng = epoch_rng.split(((b as u64) << 32) | i as u64);
                    params.loss_and_grad(table, &data[i], &sw, &kw, rate, cfg.tbptt_len, &mut rng)
                })
                .collect();
            let mut loss = 0.0;
            let mut grad: Option<ModelParams> = None;
            for r in results {
                let (l, g) = r.map_err(|e| Error::Numeric(format!("epoch {epoch} batch {b}: {e}")))?;
                loss += l;
                match grad.as_mut() {
                    Some(acc) => acc.add_assign(&g),
                    None => grad = Some(g),
                }
            }
            let mut g = grad.expect("non-empty batch").flat();
            let (grad_norm, clip_scale) = clip_global_norm(&mut g, cfg.grad_clip);
            let applied_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !grad_norm.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch} batch {b}: non-finite gradient")));
            }
            adam.step(&mut flat, &g);
            params.set_flat(&flat);
            log::debug!("epoch {epoch} batch {b} loss {loss:.4} |g| {grad_norm:.3}");
            report.steps.push(StepRecord {
                epoch,
                batch: b,
                loss,
                grad_norm,
                clip_scale,
                applied_norm,
            });
            epoch_loss += loss;
        }
        let mean = epoch_loss / total_utts.max(1) as f64;
        log::info!("epoch {} mean loss {mean:.4}", epoch + 1);
        report.epoch_losses.push(mean);
    }
    Ok(report)
}
