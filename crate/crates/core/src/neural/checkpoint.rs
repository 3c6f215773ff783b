//! Named-tensor checkpoint format.

use std::path::Path;

use ndarray::ArrayViewD;
use serde::{Deserialize, Serialize};

use super::embed::EmbeddingSpec;
use super::model::{ModelParams, NetConfig, Variant};
use super::NeuralModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    fn from_view(name: String, t: ArrayViewD<'_, f64>) -> Self {
        NamedTensor {
            name,
            shape: t.shape().to_vec(),
            data: t.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub variant: Variant,
    pub config: NetConfig,
    pub embedding: EmbeddingSpec,
    pub seed: u64,
    pub tensors: Vec<NamedTensor>,
}

impl From<NeuralModel> for Checkpoint {
    fn from(m: NeuralModel) -> Self {
        let tensors = m
            .params
            .tensors()
            .into_iter()
            .map(|(n, t)| NamedTensor::from_view(n, t))
            .collect();
        Checkpoint {
            variant: m.config.variant,
            config: m.config,
            embedding: m.embedding,
            seed: m.seed,
            tensors,
        }
    }
}

impl TryFrom<Checkpoint> for NeuralModel {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        if c.variant != c.config.variant {
            return Err(Error::Invariant(format!(
                "checkpoint variant {:?} disagrees with config {:?}",
                c.variant, c.config.variant
            )));
        }
        c.config.validate()?;
        let mut params = ModelParams::zeros(&c.config);
        let slots = params.tensors_mut();
        if slots.len() != c.tensors.len() {
            return Err(Error::Invariant(format!(
                "checkpoint has {} tensors, expected {}",
                c.tensors.len(),
                slots.len()
            )));
        }
        for ((name, mut slot), t) in slots.into_iter().zip(&c.tensors) {
            if name != t.name || slot.shape() != t.shape.as_slice() || t.data.len() != slot.len() {
                return Err(Error::Invariant(format!(
                    "tensor {} {:?} does not fit slot {name} {:?}",
                    t.name,
                    t.shape,
                    slot.shape()
                )));
            }
            if t.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invariant(format!("tensor {name} has non-finite entries")));
            }
            slot.iter_mut().zip(&t.data).for_each(|(s, v)| *s = *v);
        }
        Ok(NeuralModel {
            config: c.config,
            embedding: c.embedding,
            seed: c.seed,
            params,
        })
    }
}

impl NeuralModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
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
