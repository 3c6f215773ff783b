use serde::{Deserialize, Serialize};

use super::mnb::softmax;
use super::vocab::BowVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub max_epochs: usize,
    /// Stop once the gradient norm drops below this.
    pub tolerance: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            max_epochs: 500,
            tolerance: 1e-6,
        }
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    /// `weights[c][k]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrFitInfo {
    pub epochs: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

impl LrParams {
    fn zeros(n_classes: usize, vocab_size: usize) -> Self {
        LrParams {
            weights: vec![vec![0.0; vocab_size]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    fn logits(&self, doc: &BowVector) -> Vec<f64> {
        self.bias
            .iter()
            .zip(&self.weights)
            .map(|(b, row)| b + doc.iter().map(|&(k, n)| n * row[k]).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, doc: &BowVector) -> Vec<f64> {
        softmax(&self.logits(doc))
    }

    fn axpy(&self, step: f64, dir: &LrParams) -> LrParams {
        LrParams {
            weights: self
                .weights
                .iter()
                .zip(&dir.weights)
                .map(|(w, d)| w.iter().zip(d).map(|(a, b)| a + step * b).collect())
                .collect(),
            bias: self.bias.iter().zip(&dir.bias).map(|(a, b)| a + step * b).collect(),
        }
    }

    fn sq_norm(&self) -> f64 {
        self.weights.iter().flatten().chain(&self.bias).map(|x| x * x).sum()
    }
}

struct Problem<'a> {
    docs: &'a [BowVector],
    targets: &'a [Vec<f64>],
    weights: Vec<f64>,
}

impl Problem<'_> {
    /// Weighted cross entropy, averaged over documents.
    fn loss(&self, p: &LrParams) -> f64 {
        let n = self.docs.len() as f64;
        let mut total = 0.0;
        for (doc, t) in self.docs.iter().zip(self.targets) {
            let z = p.logits(doc);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for c in 0..z.len() {
                if t[c] > 0.0 {
                    total += self.weights[c] * t[c] * (lse - z[c]);
                }
            }
        }
        total / n
    }

    fn gradient(&self, p: &LrParams) -> LrParams {
        let n = self.docs.len() as f64;
        let mut g = LrParams::zeros(p.bias.len(), p.weights.first().map_or(0, Vec::len));
        for (doc, t) in self.docs.iter().zip(self.targets) {
            let probs = p.predict(doc);
            let s: f64 = t.iter().zip(&self.weights).map(|(t, w)| t * w).sum();
            for c in 0..probs.len() {
                let dz = (s * probs[c] - self.weights[c] * t[c]) / n;
                g.bias[c] += dz;
                for &(k, cnt) in doc {
                    g.weights[c][k] += dz * cnt;
                }
            }
        }
        g
    }
}

/// Full-batch gradient descent with Armijo backtracking.
///
/// Class weights are rescaled so the weighted target mass equals the number of
/// documents; multiplying every weight by a constant therefore leaves the fit unchanged.
pub fn train_lr(
    docs: &[BowVector],
    targets: &[Vec<f64>],
    class_weights: &[f64],
    vocab_size: usize,
    cfg: &LrConfig,
) -> Result<(LrParams, LrFitInfo)> {
    let n_classes = class_weights.len();
    if docs.len() != targets.len() || docs.is_empty() {
        return Err(Error::InvalidInput("need matching, non-empty docs and targets".into()));
    }
    if class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidInput(format!("class weights must be positive: {class_weights:?}")));
    }
    let mass: f64 = targets
        .iter()
        .map(|t| t.iter().zip(class_weights).map(|(t, w)| t * w).sum::<f64>())
        .sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput("targets carry no mass".into()));
    }
    let scale = docs.len() as f64 / mass;
    let problem = Problem {
        docs,
        targets,
        weights: class_weights.iter().map(|w| w * scale).collect(),
    };

    let mut params = LrParams::zeros(n_classes, vocab_size);
    let mut loss = problem.loss(&params);
    let mut step = 1.0;
    for epoch in 0..cfg.max_epochs {
        let g = problem.gradient(&params);
        let g2 = g.sq_norm();
        let info = LrFitInfo { epochs: epoch, loss, grad_norm: g2.sqrt() };
        if !g2.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at epoch {epoch}, loss {loss}")));
        }
        if g2.sqrt() < cfg.tolerance {
            return Ok((params, info));
        }
        step *= 2.0;
        loop {
            let cand = params.axpy(-step, &g);
            let cand_loss = problem.loss(&cand);
            if !cand_loss.is_finite() && step < 1e-30 {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}: step {step}, last finite loss {loss}"
                )));
            }
            if cand_loss.is_finite() && cand_loss <= loss - 1e-4 * step * g2 {
                params = cand;
                loss = cand_loss;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                log::debug!("line search stalled at epoch {epoch}; loss {loss}");
                return Ok((params, info));
            }
        }
    }
    let g = problem.gradient(&params);
    let info = LrFitInfo {
        epochs: cfg.max_epochs,
        loss,
        grad_norm: g.sq_norm().sqrt(),
    };
    Ok((params, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(v: &[f64]) -> usize {
        crate::types::argmax(v)
    }

    #[test]
    fn separable_set_fits_perfectly() {
        // term 0 marks class 0, term 1 marks class 1, term 2 is shared
        let docs: Vec<BowVector> = vec![
            vec![(0, 1.0), (2, 1.0)],
            vec![(0, 2.0)],
            vec![(1, 1.0), (2, 1.0)],
            vec![(1, 1.0)],
            vec![(1, 3.0), (2, 2.0)],
        ];
        let targets = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let (p, _) = train_lr(&docs, &targets, &[1.0, 1.0], 3, &LrConfig::default()).unwrap();
        for (d, t) in docs.iter().zip(&targets) {
            assert_eq!(argmax(&p.predict(d)), argmax(t));
        }
    }

    #[test]
    fn identical_features_reach_weighted_prior() {
        // three class-0 docs, one class-1 doc, weights 1 and 2: stationary point 3:2
        let docs: Vec<BowVector> = vec![vec![(0, 1.0)]; 4];
        let targets = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let cfg = LrConfig { max_epochs: 5000, tolerance: 1e-10 };
        let (p, info) = train_lr(&docs, &targets, &[1.0, 2.0], 1, &cfg).unwrap();
        let probs = p.predict(&docs[0]);
        assert!((probs[0] - 0.6).abs() < 1e-6, "{probs:?} after {info:?}");
    }

    #[test]
    fn scaling_weights_changes_nothing() {
        let docs: Vec<BowVector> = vec![vec![(0, 1.0), (1, 1.0)], vec![(1, 2.0)], vec![(0, 1.0), (2, 1.0)], vec![(2, 1.0)]];
        let targets = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.2, 0.0, 0.8]];
        let w = [1.0, 3.0, 0.5];
        let w2 = w.map(|x| x * 2.0);
        let cfg = LrConfig { max_epochs: 50, ..LrConfig::default() };
        let (a, _) = train_lr(&docs, &targets, &w, 3, &cfg).unwrap();
        let (b, _) = train_lr(&docs, &targets, &w2, 3, &cfg).unwrap();
        for d in &docs {
            assert_eq!(argmax(&a.predict(d)), argmax(&b.predict(d)));
        }
        // with power-of-two scaling the fits agree to the last bit
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let docs: Vec<BowVector> = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        let targets = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]];
        let (p, _) = train_lr(&docs, &targets, &[1.0; 3], 2, &LrConfig::default()).unwrap();
        for d in &docs {
            assert!((p.predict(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(p.weights.iter().flatten().all(|w| w.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let docs: Vec<BowVector> = vec![vec![(0, 1.0), (1, 2.0)], vec![(1, 1.0)]];
        let targets = vec![vec![0.7, 0.3], vec![0.0, 1.0]];
        let problem = Problem { docs: &docs, targets: &targets, weights: vec![1.5, 0.5] };
        let p = LrParams { weights: vec![vec![0.1, -0.2], vec![0.3, 0.05]], bias: vec![0.01, -0.02] };
        let g = problem.gradient(&p);
        let h = 1e-6;
        for c in 0..2 {
            for k in 0..2 {
                let mut plus = p.clone();
                plus.weights[c][k] += h;
                let mut minus = p.clone();
                minus.weights[c][k] -= h;
                let fd = (problem.loss(&plus) - problem.loss(&minus)) / (2.0 * h);
                assert!((fd - g.weights[c][k]).abs() < 1e-8);
            }
        }
    }
}
