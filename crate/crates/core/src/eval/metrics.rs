use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// Macro one-vs-rest mean over evaluable classes.
    pub auroc: f64,
    pub auprc: f64,
    /// `None` for classes without both a positive and a negative example.
    pub per_class_auroc: Vec<Option<f64>>,
    pub per_class_auprc: Vec<Option<f64>>,
    /// Gold count per class.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Parts {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn confusion_and_f1(preds: &[usize], golds: &[usize], n_classes: usize) -> Result<F1Parts> {
    if preds.len() != golds.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("no predictions to score".into()));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= n_classes || g >= n_classes {
            return Err(Error::InvalidInput(format!("class id out of range: pred {p}, gold {g}")));
        }
        confusion[g][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let pred_pos: usize = (0..n_classes).map(|g| confusion[g][c]).sum();
            let gold_pos: usize = confusion[c].iter().sum();
            let p = if pred_pos > 0 { tp / pred_pos as f64 } else { 0.0 };
            let r = if gold_pos > 0 { tp / gold_pos as f64 } else { 0.0 };
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .collect();
    Ok(F1Parts {
        accuracy: correct as f64 / preds.len() as f64,
        macro_f1: per_class_f1.iter().sum::<f64>() / n_classes as f64,
        per_class_f1,
        confusion,
    })
}

fn binary_view(scores: &[Vec<f64>], golds: &[usize], class: usize) -> (Vec<f64>, Vec<bool>) {
    (scores.iter().map(|s| s[class]).collect(), golds.iter().map(|&g| g == class).collect())
}

/// Probability that a random positive outscores a random negative, ties counting
/// one half. Computed from midranks. `None` without both kinds of example.
pub fn binary_auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Step-wise area under the precision-recall curve (average precision), with
/// tied scores entering as one threshold.
pub fn binary_auprc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            seen += 1;
            if labels[k] {
                tp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Some(area)
}

type BinaryMetric = fn(&[f64], &[bool]) -> Option<f64>;

fn macro_ovr(scores: &[Vec<f64>], golds: &[usize], n_classes: usize, metric: BinaryMetric) -> Result<(f64, Vec<Option<f64>>)> {
    if scores.len() != golds.len() {
        return Err(Error::InvalidInput("scores and golds differ in length".into()));
    }
    if let Some(bad) = scores.iter().find(|s| s.len() != n_classes) {
        return Err(Error::InvalidInput(format!("score vector of length {} for {n_classes} classes", bad.len())));
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let (s, l) = binary_view(scores, golds, c);
            metric(&s, &l)
        })
        .collect();
    let evaluable: Vec<f64> = per_class.iter().flatten().copied().collect();
    if evaluable.is_empty() {
        return Err(Error::InvalidInput("no class has both positive and negative examples".into()));
    }
    let skipped: Vec<usize> = (0..n_classes).filter(|&c| per_class[c].is_none()).collect();
    if !skipped.is_empty() {
        log::debug!("classes {skipped:?} skipped: missing positives or negatives");
    }
    Ok((evaluable.iter().sum::<f64>() / evaluable.len() as f64, per_class))
}

/// Macro one-vs-rest AUROC plus the per-class values.
pub fn auroc(scores: &[Vec<f64>], golds: &[usize], n_classes: usize) -> Result<(f64, Vec<Option<f64>>)> {
    macro_ovr(scores, golds, n_classes, binary_auroc)
}

pub fn auprc(scores: &[Vec<f64>], golds: &[usize], n_classes: usize) -> Result<(f64, Vec<Option<f64>>)> {
    macro_ovr(scores, golds, n_classes, binary_auprc)
}

/// All metrics; predictions are the argmax of the scores.
pub fn evaluate(scores: &[Vec<f64>], golds: &[usize], n_classes: usize) -> Result<MetricReport> {
    let preds: Vec<usize> = scores.iter().map(|s| crate::types::argmax(s)).collect();
    let f1 = confusion_and_f1(&preds, golds, n_classes)?;
    let (auroc, per_class_auroc) = auroc(scores, golds, n_classes)?;
    let (auprc, per_class_auprc) = auprc(scores, golds, n_classes)?;
    let mut counts = vec![0; n_classes];
    for &g in golds {
        counts[g] += 1;
    }
    Ok(MetricReport {
        n: golds.len(),
        accuracy: f1.accuracy,
        macro_f1: f1.macro_f1,
        per_class_f1: f1.per_class_f1,
        auroc,
        auprc,
        per_class_auroc,
        per_class_auprc,
        counts,
    })
}

/// Mean negative log probability of the gold class.
pub fn log_loss(probs: &[Vec<f64>], golds: &[usize]) -> f64 {
    let total: f64 = probs.iter().zip(golds).map(|(p, &g)| -p[g].max(1e-15).ln()).sum();
    total / golds.len().max(1) as f64
}
