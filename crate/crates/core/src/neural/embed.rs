//! Frozen contextual-embedding stand-ins: every token gets `K` layer vectors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

pub const N_LAYERS: usize = 3;

pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    /// `N_LAYERS x dim`; the pad token must map to zeros.
    fn embed(&self, token: &str) -> Array2<f64>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Pseudo-random unit vectors keyed by (lowercased token, seed, layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbedding {
    pub dim: usize,
    pub seed: u64,
}

impl EmbeddingProvider for HashEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Array2<f64> {
        let mut out = Array2::zeros((N_LAYERS, self.dim));
        if token.is_empty() {
            return out;
        }
        let base = fnv1a(token.to_lowercase().as_bytes()) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for k in 0..N_LAYERS {
            let mut rng = Rng::new(base.wrapping_add((k as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)));
            let v: Vec<f64> = (0..self.dim).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for (d, x) in v.into_iter().enumerate() {
                out[[k, d]] = x / norm;
            }
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct FileRecord {
    token: String,
    layers: Vec<Vec<f64>>,
}

/// Precomputed vectors read from JSON lines `{"token": ..., "layers": [[..], [..], [..]]}`.
/// Unknown tokens map to zeros.
#[derive(Debug, Clone)]
pub struct FileEmbedding {
    dim: usize,
    vectors: HashMap<String, Array2<f64>>,
}

impl FileEmbedding {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let records: Vec<FileRecord> = crate::corpus::read_jsonl(path.as_ref())?;
        let dim = records.first().and_then(|r| r.layers.first()).map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput(format!("{}: no embeddings", path.as_ref().display())));
        }
        let mut vectors = HashMap::new();
        for (i, r) in records.into_iter().enumerate() {
            if r.layers.len() != N_LAYERS || r.layers.iter().any(|l| l.len() != dim) {
                return Err(Error::Validation {
                    line: i + 1,
                    field: "layers".into(),
                    value: format!("expected {N_LAYERS} layers of length {dim}"),
                });
            }
            let flat: Vec<f64> = r.layers.into_iter().flatten().collect();
            let arr = Array2::from_shape_vec((N_LAYERS, dim), flat).expect("shape checked");
            vectors.insert(r.token, arr);
        }
        Ok(FileEmbedding { dim, vectors })
    }
}

impl EmbeddingProvider for FileEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Array2<f64> {
        self.vectors
            .get(token)
            .cloned()
            .unwrap_or_else(|| Array2::zeros((N_LAYERS, self.dim)))
    }
}

/// Serializable description of where embeddings come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSpec {
    Hash { dim: usize, seed: u64 },
    File { path: PathBuf },
}

impl EmbeddingSpec {
    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            EmbeddingSpec::Hash { dim, seed } => Box::new(HashEmbedding { dim: *dim, seed: *seed }),
            EmbeddingSpec::File { path } => Box::new(FileEmbedding::load(path)?),
        })
    }
}

/// Dense lookup table over a fixed token set.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    index: HashMap<String, usize>,
    vectors: Array3<f64>,
}

impl EmbeddingTable {
    pub fn build<'a>(provider: &dyn EmbeddingProvider, tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut index = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for t in tokens {
            if !t.is_empty() && !index.contains_key(t) {
                index.insert(t.to_string(), order.len());
                order.push(t);
            }
        }
        let dim = provider.dim();
        let mut vectors = Array3::zeros((order.len(), N_LAYERS, dim));
        for (i, t) in order.iter().enumerate() {
            vectors.slice_mut(ndarray::s![i, .., ..]).assign(&provider.embed(t));
        }
        EmbeddingTable { index, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[2]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn get(&self, id: usize) -> ArrayView2<'_, f64> {
        self.vectors.slice(ndarray::s![id, .., ..])
    }

    /// Ids of the non-pad tokens.
    pub fn ids<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<usize> {
        tokens.into_iter().filter_map(|t| self.id(t)).collect()
    }
}
