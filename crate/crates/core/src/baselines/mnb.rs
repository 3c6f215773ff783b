use serde::{Deserialize, Serialize};

use super::vocab::BowVector;
use crate::{Error, Result};

/// Multinomial naive Bayes with a uniform class prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbParams {
    pub log_prior: Vec<f64>,
    /// `log_likelihood[c][k] = log P(term k | class c)`.
    pub log_likelihood: Vec<Vec<f64>>,
}

/// Fit from (possibly fractional) class targets. Every class gets a row even if
/// it never appears in the targets.
pub fn train_mnb(docs: &[BowVector], targets: &[Vec<f64>], n_classes: usize, vocab_size: usize, smoothing: f64) -> Result<MnbParams> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing must be positive, got {smoothing}")));
    }
    if docs.len() != targets.len() {
        return Err(Error::InvalidInput("docs and targets differ in length".into()));
    }
    let mut counts = vec![vec![0.0; vocab_size]; n_classes];
    for (doc, t) in docs.iter().zip(targets) {
        for (c, &w) in t.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(k, n) in doc {
                counts[c][k] += w * n;
            }
        }
    }
    let log_likelihood = counts
        .into_iter()
        .map(|row| {
            let denom = (row.iter().sum::<f64>() + smoothing * vocab_size as f64).ln();
            row.into_iter().map(|n| (n + smoothing).ln() - denom).collect()
        })
        .collect();
    Ok(MnbParams {
        log_prior: vec![-(n_classes as f64).ln(); n_classes],
        log_likelihood,
    })
}

impl MnbParams {
    pub fn predict(&self, doc: &BowVector) -> Vec<f64> {
        let scores: Vec<f64> = self
            .log_prior
            .iter()
            .zip(&self.log_likelihood)
            .map(|(p, row)| p + doc.iter().map(|&(k, n)| n * row[k]).sum::<f64>())
            .collect();
        softmax(&scores)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
