//! Hierarchical attention / recurrent utterance classifier with hand-written gradients.

mod attention;
mod checkpoint;
mod embed;
mod lstm;
mod model;
mod train;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use attention::{layer_attention, layer_attention_backward, word_attention, word_attention_backward};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use embed::{EmbeddingProvider, EmbeddingSpec, EmbeddingTable, FileEmbedding, HashEmbedding, N_LAYERS};
pub use lstm::{BiLstm, Lstm, Masks};
pub use model::{gradient_check, weighted_ce, Dense, EncodedTranscript, Head, ModelParams, NetConfig, TensorCheck, Variant};
pub use train::{clip_global_norm, train, Adam, StepRecord, TrainConfig, TrainReport};

use crate::data::LabeledTranscript;
use crate::{Error, Result, Rng};

/// Trained parameters plus everything needed to rebuild inputs at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint", try_from = "Checkpoint")]
pub struct NeuralModel {
    pub config: NetConfig,
    pub embedding: EmbeddingSpec,
    pub seed: u64,
    pub params: ModelParams,
}

/// (SOAP probabilities, speaker probabilities) for each utterance of a transcript.
pub type TranscriptScores = Vec<(Vec<f64>, Vec<f64>)>;

impl NeuralModel {
    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn predict_transcript(&self, provider: &dyn EmbeddingProvider, t: &LabeledTranscript) -> Result<TranscriptScores> {
        let table = EmbeddingTable::build(provider, t.examples.iter().flat_map(|e| e.real_tokens()));
        let enc = EncodedTranscript::encode(t, &table);
        self.params.predict(&table, &enc.utterances)
    }

    pub fn predict_corpus(&self, transcripts: &[LabeledTranscript]) -> Result<Vec<TranscriptScores>> {
        let provider = self.embedding.provider()?;
        check_dim(&*provider, &self.config)?;
        transcripts
            .par_iter()
            .map(|t| self.predict_transcript(&*provider, t))
            .collect()
    }
}

fn check_dim(provider: &dyn EmbeddingProvider, cfg: &NetConfig) -> Result<()> {
    if provider.dim() != cfg.dim {
        return Err(Error::InvalidInput(format!(
            "embedding dimension {} does not match network dimension {}",
            provider.dim(),
            cfg.dim
        )));
    }
    Ok(())
}

/// Initialise from `cfg.seed` and train on `data`.
pub fn fit_neural(
    data: &[LabeledTranscript],
    net: &NetConfig,
    embedding: EmbeddingSpec,
    cfg: &TrainConfig,
) -> Result<(NeuralModel, TrainReport)> {
    net.validate()?;
    let provider = embedding.provider()?;
    check_dim(&*provider, net)?;
    let table = EmbeddingTable::build(&*provider, data.iter().flat_map(|t| t.examples.iter().flat_map(|e| e.real_tokens())));
    let encoded: Vec<EncodedTranscript> = data.iter().map(|t| EncodedTranscript::encode(t, &table)).collect();
    let root = Rng::new(cfg.seed);
    let mut params = ModelParams::new(net, &mut root.split(0));
    let train_cfg = TrainConfig {
        seed: root.split(1).next_u64(),
        ..cfg.clone()
    };
    let report = train(&mut params, &table, &encoded, &train_cfg)?;
    Ok((
        NeuralModel {
            config: net.clone(),
            embedding,
            seed: cfg.seed,
            params,
        },
        report,
    ))
}
