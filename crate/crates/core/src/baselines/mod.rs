//! Bag-of-words baselines: majority class, multinomial naive Bayes and
//! logistic regression.

mod lr;
mod mnb;
mod vocab;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lr::{train_lr, LrConfig, LrFitInfo, LrParams};
pub use mnb::{train_mnb, MnbParams};
pub use vocab::{fit_vocab, BowVector, Vocabulary};

use crate::data::{expected_counts, inverse_frequency_weights, Example, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Mc,
    Mnb,
    Lr,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Mc, BaselineKind::Mnb, BaselineKind::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Mc => "mc",
            BaselineKind::Mnb => "mnb",
            BaselineKind::Lr => "lr",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" => Ok(BaselineKind::Mc),
            "mnb" => Ok(BaselineKind::Mnb),
            "lr" => Ok(BaselineKind::Lr),
            other => Err(Error::InvalidInput(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineParams {
    Mc { class: usize },
    Mnb(MnbParams),
    Lr(LrParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub task: Task,
    pub n_classes: usize,
    pub vocab: Vocabulary,
    pub params: BaselineParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub smoothing: f64,
    pub lr: LrConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            smoothing: 1.0,
            lr: LrConfig::default(),
        }
    }
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self.params {
            BaselineParams::Mc { .. } => BaselineKind::Mc,
            BaselineParams::Mnb(_) => BaselineKind::Mnb,
            BaselineParams::Lr(_) => BaselineKind::Lr,
        }
    }

    /// Probability vector for MNB and LR, one-hot for MC.
    pub fn predict<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        match &self.params {
            BaselineParams::Mc { class } => {
                let mut v = vec![0.0; self.n_classes];
                v[*class] = 1.0;
                v
            }
            BaselineParams::Mnb(m) => m.predict(&self.vocab.bow(tokens)),
            BaselineParams::Lr(m) => m.predict(&self.vocab.bow(tokens)),
        }
    }

    pub fn predict_example(&self, e: &Example) -> Vec<f64> {
        self.predict(e.real_tokens())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Fit one baseline for one task on a flat list of examples.
pub fn train_baseline(kind: BaselineKind, task: Task, examples: &[&Example], cfg: &BaselineConfig) -> Result<BaselineModel> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("no training utterances".into()));
    }
    let vocab = fit_vocab(examples.iter().map(|e| e.real_tokens()))?;
    let n_classes = task.n_classes();
    let counts = expected_counts(examples.iter().copied(), task);
    let params = match kind {
        BaselineKind::Mc => BaselineParams::Mc {
            class: crate::types::argmax(&counts),
        },
        BaselineKind::Mnb | BaselineKind::Lr => {
            let docs: Vec<BowVector> = examples.iter().map(|e| vocab.bow(e.real_tokens())).collect();
            let targets: Vec<Vec<f64>> = examples.iter().map(|e| e.target(task).to_vec()).collect();
            if kind == BaselineKind::Mnb {
                BaselineParams::Mnb(train_mnb(&docs, &targets, n_classes, vocab.len(), cfg.smoothing)?)
            } else {
                let weights = inverse_frequency_weights(&counts);
                let (params, info) = train_lr(&docs, &targets, &weights, vocab.len(), &cfg.lr)?;
                log::info!(
                    "lr {task:?}: {} epochs, loss {:.5}, grad norm {:.2e}",
                    info.epochs,
                    info.loss,
                    info.grad_norm
                );
                BaselineParams::Lr(params)
            }
        }
    };
    Ok(BaselineModel {
        task,
        n_classes,
        vocab,
        params,
    })
}
