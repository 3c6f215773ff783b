//! One model file for every classifier family: training with a held-out
//! calibration tail, prediction and side-by-side evaluation.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{train_baseline, BaselineConfig, BaselineKind, BaselineModel};
use crate::data::{split_tail, LabeledTranscript, Task};
use crate::eval::{evaluate, fit_platt, MetricReport, PlattCalibrator};
use crate::neural::{fit_neural, EmbeddingSpec, NetConfig, NeuralModel, TrainConfig, TrainReport, Variant};
use crate::preprocess::PreprocessConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mc,
    Mnb,
    Lr,
    Dlb,
    Wa,
    Bil,
    Bild,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Mc,
        ModelKind::Mnb,
        ModelKind::Lr,
        ModelKind::Dlb,
        ModelKind::Wa,
        ModelKind::Bil,
        ModelKind::Bild,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mc => "mc",
            ModelKind::Mnb => "mnb",
            ModelKind::Lr => "lr",
            ModelKind::Dlb => "dlb",
            ModelKind::Wa => "wa",
            ModelKind::Bil => "bil",
            ModelKind::Bild => "bild",
        }
    }

    /// Name used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Mc => "MC",
            ModelKind::Mnb => "MNB",
            ModelKind::Lr => "LR",
            other => other.variant().expect("neural kind").display_name(),
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            ModelKind::Mc => Some(BaselineKind::Mc),
            ModelKind::Mnb => Some(BaselineKind::Mnb),
            ModelKind::Lr => Some(BaselineKind::Lr),
            _ => None,
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Dlb => Some(Variant::Dlb),
            ModelKind::Wa => Some(Variant::Wa),
            ModelKind::Bil => Some(Variant::WaBil),
            ModelKind::Bild => Some(Variant::WaBilLd),
            _ => None,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == lower)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Classifier {
    Baseline { soap: BaselineModel, speaker: BaselineModel },
    Neural(NeuralModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub soap: PlattCalibrator,
    pub speaker: PlattCalibrator,
}

impl Calibration {
    pub fn get(&self, task: Task) -> &PlattCalibrator {
        match task {
            Task::Soap => &self.soap,
            Task::Speaker => &self.speaker,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub with_asr: bool,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub classifier: Classifier,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub seed: u64,
    pub with_asr: bool,
    /// Share of training transcripts (taken from the end) held out for calibration.
    pub calibration_fraction: f64,
    pub baseline: BaselineConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Defaults to hash embeddings of width `net.dim` keyed by `seed`.
    pub embedding: Option<EmbeddingSpec>,
    pub preprocess: PreprocessConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            with_asr: false,
            calibration_fraction: 0.1,
            baseline: BaselineConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            embedding: None,
            preprocess: PreprocessConfig::default(),
        }
    }
}

/// Per-utterance scores for both tasks, flattened over transcripts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scores {
    pub soap: Vec<Vec<f64>>,
    pub speaker: Vec<Vec<f64>>,
}

impl Scores {
    pub fn get(&self, task: Task) -> &[Vec<f64>] {
        match task {
            Task::Soap => &self.soap,
            Task::Speaker => &self.speaker,
        }
    }

    pub fn len(&self) -> usize {
        self.soap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soap.is_empty()
    }
}

pub fn golds(data: &[LabeledTranscript], task: Task) -> Vec<usize> {
    data.iter().flat_map(|t| t.examples.iter().map(move |e| e.gold(task))).collect()
}

/// Scores that are the targets themselves.
pub fn oracle_scores(data: &[LabeledTranscript]) -> Scores {
    let ex = || data.iter().flat_map(|t| t.examples.iter());
    Scores {
        soap: ex().map(|e| e.soap.to_vec()).collect(),
        speaker: ex().map(|e| e.speaker.to_vec()).collect(),
    }
}

fn predict_classifier(c: &Classifier, data: &[LabeledTranscript]) -> Result<Scores> {
    match c {
        Classifier::Baseline { soap, speaker } => {
            let ex: Vec<_> = data.iter().flat_map(|t| t.examples.iter()).collect();
            Ok(Scores {
                soap: ex.par_iter().map(|e| soap.predict_example(e)).collect(),
                speaker: ex.par_iter().map(|e| speaker.predict_example(e)).collect(),
            })
        }
        Classifier::Neural(m) => {
            let mut s = Scores::default();
            for t in m.predict_corpus(data)? {
                for (a, b) in t {
                    s.soap.push(a);
                    s.speaker.push(b);
                }
            }
            Ok(s)
        }
    }
}

fn fit_classifier(kind: ModelKind, data: &[LabeledTranscript], opts: &TrainOptions) -> Result<(Classifier, Option<TrainReport>)> {
    if let Some(b) = kind.baseline() {
        let ex: Vec<_> = data.iter().flat_map(|t| t.examples.iter()).collect();
        let soap = train_baseline(b, Task::Soap, &ex, &opts.baseline)?;
        let speaker = train_baseline(b, Task::Speaker, &ex, &opts.baseline)?;
        return Ok((Classifier::Baseline { soap, speaker }, None));
    }
    let net = NetConfig {
        variant: kind.variant().expect("neural kind"),
        ..opts.net.clone()
    };
    let embedding = opts.embedding.clone().unwrap_or(EmbeddingSpec::Hash {
        dim: net.dim,
        seed: opts.seed,
    });
    let cfg = TrainConfig {
        seed: opts.seed,
        ..opts.train.clone()
    };
    let (m, report) = fit_neural(data, &net, embedding, &cfg)?;
    Ok((Classifier::Neural(m), Some(report)))
}

/// Train on all but the calibration tail, then fit Platt scaling on the tail.
pub fn train_model(kind: ModelKind, data: &[LabeledTranscript], opts: &TrainOptions) -> Result<(ModelFile, Option<TrainReport>)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no training transcripts".into()));
    }
    let (fit, held) = split_tail(data, opts.calibration_fraction);
    let (classifier, report) = fit_classifier(kind, &fit, opts)?;
    let calibration = if held.is_empty() {
        log::warn!("too few transcripts for a calibration split; identity calibration");
        Calibration {
            soap: PlattCalibrator::identity(Task::Soap.n_classes()),
            speaker: PlattCalibrator::identity(Task::Speaker.n_classes()),
        }
    } else {
        let s = predict_classifier(&classifier, &held)?;
        Calibration {
            soap: fit_platt(&s.soap, &golds(&held, Task::Soap), Task::Soap.n_classes())?,
            speaker: fit_platt(&s.speaker, &golds(&held, Task::Speaker), Task::Speaker.n_classes())?,
        }
    };
    Ok((
        ModelFile {
            kind,
            with_asr: opts.with_asr,
            seed: opts.seed,
            preprocess: opts.preprocess.clone(),
            classifier,
            calibration,
        },
        report,
    ))
}

impl ModelFile {
    pub fn predict(&self, data: &[LabeledTranscript]) -> Result<Scores> {
        predict_classifier(&self.classifier, data)
    }

    pub fn calibrate(&self, s: &Scores) -> Scores {
        Scores {
            soap: s.soap.iter().map(|p| self.calibration.soap.apply(p)).collect(),
            speaker: s.speaker.iter().map(|p| self.calibration.speaker.apply(p)).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Uncalibrated and calibrated metrics for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task: Task,
    pub uncalibrated: MetricReport,
    pub calibrated: MetricReport,
}

pub fn evaluate_scores(raw: &Scores, calibrated: &Scores, data: &[LabeledTranscript]) -> Result<Vec<TaskEvaluation>> {
    Task::BOTH
        .iter()
        .map(|&task| {
            let g = golds(data, task);
            Ok(TaskEvaluation {
                task,
                uncalibrated: evaluate(raw.get(task), &g, task.n_classes())?,
                calibrated: evaluate(calibrated.get(task), &g, task.n_classes())?,
            })
        })
        .collect()
}

pub fn evaluate_model(model: &ModelFile, data: &[LabeledTranscript]) -> Result<Vec<TaskEvaluation>> {
    let raw = model.predict(data)?;
    evaluate_scores(&raw, &model.calibrate(&raw), data)
}
