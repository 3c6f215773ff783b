use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub const IDENTITY: PlattParams = PlattParams { a: 1.0, b: 0.0 };

    /// `sigmoid(a * logit(p) + b)`.
    pub fn apply(&self, p: f64) -> f64 {
        sigmoid(self.a * logit(p) + self.b)
    }
}

/// One sigmoid per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub classes: Vec<PlattParams>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    (p / (1.0 - p)).ln()
}

fn nll(x: &[f64], y: &[bool], a: f64, b: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&x, &y)| {
            let z = a * x + b;
            // -log sigmoid(z) = softplus(-z)
            let sp = |v: f64| if v > 0.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
            if y {
                sp(-z)
            } else {
                sp(z)
            }
        })
        .sum::<f64>()
        / x.len() as f64
}

/// Newton's method with backtracking on the binary log loss of `sigmoid(a*x + b)`.
fn fit_binary(x: &[f64], y: &[bool]) -> PlattParams {
    let (mut a, mut b) = (1.0, 0.0);
    let mut loss = nll(x, y, a, b);
    let n = x.len() as f64;
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(a * xi + b);
            let d = p - if yi { 1.0 } else { 0.0 };
            let w = (p * (1.0 - p)).max(1e-12);
            ga += d * xi;
            gb += d;
            haa += w * xi * xi;
            hab += w * xi;
            hbb += w;
        }
        let (ga, gb) = (ga / n, gb / n);
        let (haa, hab, hbb) = (haa / n + 1e-9, hab / n, hbb / n + 1e-9);
        if ga.hypot(gb) < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if det > 1e-15 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        if da * ga + db * gb <= 0.0 {
            // not a descent direction; fall back to the gradient
            da = ga;
            db = gb;
        }
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let cand = nll(x, y, a - step * da, b - step * db);
            if cand.is_finite() && cand <= loss - 1e-4 * step * (da * ga + db * gb) {
                a -= step * da;
                b -= step * db;
                loss = cand;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    PlattParams { a, b }
}

/// Fit per-class sigmoids on held-out probabilities and gold class ids.
/// A class whose targets are all equal keeps the identity map.
pub fn fit_platt(val_probs: &[Vec<f64>], val_golds: &[usize], n_classes: usize) -> Result<PlattCalibrator> {
    if val_probs.len() != val_golds.len() || val_probs.is_empty() {
        return Err(Error::InvalidInput("calibration needs matching, non-empty scores and labels".into()));
    }
    let classes = (0..n_classes)
        .map(|c| {
            let x: Vec<f64> = val_probs.iter().map(|p| logit(p[c])).collect();
            let y: Vec<bool> = val_golds.iter().map(|&g| g == c).collect();
            if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
                log::warn!("class {c}: validation labels are all equal; identity calibration");
                return PlattParams::IDENTITY;
            }
            let p = fit_binary(&x, &y);
            if p.a.is_finite() && p.b.is_finite() {
                p
            } else {
                log::warn!("class {c}: non-finite Platt fit; identity calibration");
                PlattParams::IDENTITY
            }
        })
        .collect();
    Ok(PlattCalibrator { classes })
}

impl PlattCalibrator {
    pub fn identity(n_classes: usize) -> Self {
        PlattCalibrator {
            classes: vec![PlattParams::IDENTITY; n_classes],
        }
    }

    /// Calibrated per-class scores without renormalization; each class is a
    /// monotone map of its input.
    pub fn apply_per_class(&self, probs: &[f64]) -> Vec<f64> {
        probs.iter().zip(&self.classes).map(|(&p, c)| c.apply(p)).collect()
    }

    /// Calibrated distribution, renormalized to sum 1.
    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        let raw = self.apply_per_class(probs);
        let z: f64 = raw.iter().sum();
        if z > 0.0 {
            raw.into_iter().map(|v| v / z).collect()
        } else {
            vec![1.0 / probs.len() as f64; probs.len()]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::log_loss;
    use crate::Rng;

    fn binary_fixture(temperature: f64, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut probs = Vec::new();
        let mut golds = Vec::new();
        for _ in 0..n {
            let z = 2.0 * rng.normal();
            let truth = sigmoid(z);
            let y = rng.bernoulli(truth);
            let shown = sigmoid(z / temperature);
            probs.push(vec![1.0 - shown, shown]);
            golds.push(usize::from(y));
        }
        (probs, golds)
    }

    #[test]
    fn identity_params_are_identity() {
        for p in [0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((PlattParams::IDENTITY.apply(p) - p).abs() < 1e-12);
        }
        let c = PlattCalibrator::identity(3);
        let out = c.apply(&[0.2, 0.3, 0.5]);
        assert!(out.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn overconfident_scores_improve() {
        let (val, val_g) = binary_fixture(0.25, 2000, 1);
        let (test, test_g) = binary_fixture(0.25, 2000, 2);
        let cal = fit_platt(&val, &val_g, 2).unwrap();
        let after: Vec<Vec<f64>> = test.iter().map(|p| cal.apply(p)).collect();
        assert!(log_loss(&after, &test_g) < log_loss(&test, &test_g));
        // recovered slope is near the temperature
        assert!((cal.classes[1].a - 0.25).abs() < 0.05, "{:?}", cal.classes[1]);
    }

    #[test]
    fn calibrated_scores_stay_put() {
        let (val, val_g) = binary_fixture(1.0, 4000, 3);
        let cal = fit_platt(&val, &val_g, 2).unwrap();
        let after: Vec<Vec<f64>> = val.iter().map(|p| cal.apply(p)).collect();
        assert!((log_loss(&after, &val_g) - log_loss(&val, &val_g)).abs() < 1e-3);
    }

    #[test]
    fn degenerate_class_falls_back_to_identity() {
        let cal = fit_platt(&[vec![0.9, 0.1], vec![0.8, 0.2]], &[0, 0], 2).unwrap();
        assert_eq!(cal.classes, vec![PlattParams::IDENTITY; 2]);
    }
}
