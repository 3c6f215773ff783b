//! Hierarchical utterance classifier: layer attention over embedding layers,
//! word attention over tokens, an optional stacked bi-LSTM over utterances,
//! then either dense softmax heads or two LSTM decoders.

use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use serde::{Deserialize, Serialize};

use super::attention::{
    layer_attention, layer_attention_backward, softmax_in_place, word_attention, word_attention_backward,
};
use super::embed::EmbeddingTable;
use super::lstm::{BiLstm, BiTrace, Lstm, LstmTrace, Masks};
use crate::types::{N_SECTIONS, N_SPEAKERS};
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Mean of layer-attended word vectors, dense heads.
    Dlb,
    /// Trainable word attention.
    Wa,
    /// Word attention plus a stacked bi-LSTM over utterances.
    WaBil,
    /// As `WaBil` with LSTM decoders instead of dense heads.
    WaBilLd,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dlb, Variant::Wa, Variant::WaBil, Variant::WaBilLd];

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Dlb => "DLB",
            Variant::Wa => "DLB+WA",
            Variant::WaBil => "DLB+WA+BiL",
            Variant::WaBilLd => "DLB+WA+BiL+LD",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Dlb => "dlb",
            Variant::Wa => "wa",
            Variant::WaBil => "wa_bil",
            Variant::WaBilLd => "wa_bil_ld",
        }
    }

    pub fn word_attention(self) -> bool {
        self != Variant::Dlb
    }

    pub fn bilstm(self) -> bool {
        matches!(self, Variant::WaBil | Variant::WaBilLd)
    }

    pub fn decoder(self) -> bool {
        self == Variant::WaBilLd
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['+', '-'], "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == norm || v.display_name().to_ascii_lowercase().replace('+', "_") == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub variant: Variant,
    /// Embedding width D.
    pub dim: usize,
    /// Per-direction hidden size of each bi-LSTM layer.
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            variant: Variant::WaBil,
            dim: 16,
            encoder_hidden: vec![16, 8],
            decoder_hidden: 64,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.decoder_hidden == 0 || self.encoder_hidden.contains(&0) {
            return Err(Error::InvalidInput("network dimensions must be positive".into()));
        }
        if self.variant.bilstm() && self.encoder_hidden.is_empty() {
            return Err(Error::InvalidInput("bi-LSTM variants need at least one encoder layer".into()));
        }
        Ok(())
    }

    fn feature_dim(&self) -> usize {
        if self.variant.bilstm() {
            2 * self.encoder_hidden.last().copied().unwrap_or(0)
        } else {
            self.dim
        }
    }
}

/// Affine map `w x + b` with `w` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn new(out: usize, input: usize, rng: &mut Rng) -> Self {
        let s = (6.0 / (out + input) as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((out, input), |_| (2.0 * rng.uniform() - 1.0) * s),
            b: Array1::zeros(out),
        }
    }

    pub fn zeros(out: usize, input: usize) -> Self {
        Dense {
            w: Array2::zeros((out, input)),
            b: Array1::zeros(out),
        }
    }

    fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.dot(x) + &self.b
    }

    fn backward(&self, x: &Array1<f64>, dy: &Array1<f64>, grad: &mut Dense) -> Array1<f64> {
        general_mat_mul(
            1.0,
            &dy.view().insert_axis(Axis(1)),
            &x.view().insert_axis(Axis(0)),
            1.0,
            &mut grad.w,
        );
        grad.b += dy;
        self.w.t().dot(dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Dense {
        soap: Dense,
        speaker: Dense,
    },
    Decoder {
        soap: Lstm,
        soap_proj: Dense,
        speaker: Lstm,
        speaker_proj: Dense,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w_l: Array1<f64>,
    /// Absent for the mean-pooling baseline.
    pub w_w: Option<Array1<f64>>,
    pub encoder: Vec<BiLstm>,
    pub head: Head,
}

impl ModelParams {
    pub fn new(cfg: &NetConfig, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(cfg);
        let mut input = cfg.dim;
        for layer in p.encoder.iter_mut() {
            let h = layer.fwd.hidden();
            *layer = BiLstm::new(input, h, rng);
            input = 2 * h;
        }
        let f = cfg.feature_dim();
        p.head = if cfg.variant.decoder() {
            let hd = cfg.decoder_hidden;
            Head::Decoder {
                soap: Lstm::new(f, hd, rng),
                soap_proj: Dense::new(N_SECTIONS, hd, rng),
                speaker: Lstm::new(f, hd, rng),
                speaker_proj: Dense::new(N_SPEAKERS, hd, rng),
            }
        } else {
            Head::Dense {
                soap: Dense::new(N_SECTIONS, f, rng),
                speaker: Dense::new(N_SPEAKERS, f, rng),
            }
        };
        p
    }

    pub fn zeros(cfg: &NetConfig) -> Self {
        let mut encoder = Vec::new();
        if cfg.variant.bilstm() {
            let mut input = cfg.dim;
            for &h in &cfg.encoder_hidden {
                encoder.push(BiLstm::zeros(input, h));
                input = 2 * h;
            }
        }
        let f = cfg.feature_dim();
        let head = if cfg.variant.decoder() {
            let hd = cfg.decoder_hidden;
            Head::Decoder {
                soap: Lstm::zeros(f, hd),
                soap_proj: Dense::zeros(N_SECTIONS, hd),
                speaker: Lstm::zeros(f, hd),
                speaker_proj: Dense::zeros(N_SPEAKERS, hd),
            }
        } else {
            Head::Dense {
                soap: Dense::zeros(N_SECTIONS, f),
                speaker: Dense::zeros(N_SPEAKERS, f),
            }
        };
        ModelParams {
            w_l: Array1::zeros(cfg.dim),
            w_w: cfg.variant.word_attention().then(|| Array1::zeros(cfg.dim)),
            encoder,
            head,
        }
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![("w_L".to_string(), self.w_l.view().into_dyn())];
        if let Some(w) = &self.w_w {
            out.push(("w_w".into(), w.view().into_dyn()));
        }
        for (l, layer) in self.encoder.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("encoder.{l}.{dir}.w"), cell.w.view().into_dyn()));
                out.push((format!("encoder.{l}.{dir}.b"), cell.b.view().into_dyn()));
            }
        }
        match &self.head {
            Head::Dense { soap, speaker } => {
                for (name, d) in [("soap", soap), ("speaker", speaker)] {
                    out.push((format!("head.{name}.w"), d.w.view().into_dyn()));
                    out.push((format!("head.{name}.b"), d.b.view().into_dyn()));
                }
            }
            Head::Decoder {
                soap,
                soap_proj,
                speaker,
                speaker_proj,
            } => {
                for (name, cell, proj) in [("soap", soap, soap_proj), ("speaker", speaker, speaker_proj)] {
                    out.push((format!("decoder.{name}.lstm.w"), cell.w.view().into_dyn()));
                    out.push((format!("decoder.{name}.lstm.b"), cell.b.view().into_dyn()));
                    out.push((format!("decoder.{name}.proj.w"), proj.w.view().into_dyn()));
                    out.push((format!("decoder.{name}.proj.b"), proj.b.view().into_dyn()));
                }
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![("w_L".to_string(), self.w_l.view_mut().into_dyn())];
        if let Some(w) = &mut self.w_w {
            out.push(("w_w".into(), w.view_mut().into_dyn()));
        }
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            let BiLstm { fwd, bwd } = layer;
            for (dir, cell) in [("fwd", fwd), ("bwd", bwd)] {
                let Lstm { w, b } = cell;
                out.push((format!("encoder.{l}.{dir}.w"), w.view_mut().into_dyn()));
                out.push((format!("encoder.{l}.{dir}.b"), b.view_mut().into_dyn()));
            }
        }
        match &mut self.head {
            Head::Dense { soap, speaker } => {
                for (name, d) in [("soap", soap), ("speaker", speaker)] {
                    let Dense { w, b } = d;
                    out.push((format!("head.{name}.w"), w.view_mut().into_dyn()));
                    out.push((format!("head.{name}.b"), b.view_mut().into_dyn()));
                }
            }
            Head::Decoder {
                soap,
                soap_proj,
                speaker,
                speaker_proj,
            } => {
                for (name, cell, proj) in [("soap", soap, soap_proj), ("speaker", speaker, speaker_proj)] {
                    let Lstm { w, b } = cell;
                    out.push((format!("decoder.{name}.lstm.w"), w.view_mut().into_dyn()));
                    out.push((format!("decoder.{name}.lstm.b"), b.view_mut().into_dyn()));
                    let Dense { w, b } = proj;
                    out.push((format!("decoder.{name}.proj.w"), w.view_mut().into_dyn()));
                    out.push((format!("decoder.{name}.proj.b"), b.view_mut().into_dyn()));
                }
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for (_, t) in self.tensors() {
            v.extend(t.iter());
        }
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let mut k = 0;
        for (_, mut t) in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = v[k];
                k += 1;
            }
        }
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Token ids (into an [`EmbeddingTable`]) per utterance plus per-task targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTranscript {
    pub utterances: Vec<Vec<usize>>,
    pub soap: Vec<[f64; N_SECTIONS]>,
    pub speaker: Vec<[f64; N_SPEAKERS]>,
}

impl EncodedTranscript {
    pub fn encode(t: &crate::data::LabeledTranscript, table: &EmbeddingTable) -> Self {
        EncodedTranscript {
            utterances: t.examples.iter().map(|e| table.ids(e.real_tokens())).collect(),
            soap: t.examples.iter().map(|e| e.soap).collect(),
            speaker: t.examples.iter().map(|e| e.speaker).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

struct UttTrace {
    ids: Vec<usize>,
    layer_w: Vec<Vec<f64>>,
    ls: Vec<Array1<f64>>,
    alpha: Vec<f64>,
    u: Array1<f64>,
}

enum HeadTrace {
    Dense {
        xs: Vec<Array1<f64>>,
    },
    Decoder {
        soap: LstmTrace,
        soap_h: Vec<Array1<f64>>,
        speaker: LstmTrace,
        speaker_h: Vec<Array1<f64>>,
    },
}

/// Activations of one transcript kept for the backward pass.
pub struct Forward {
    utts: Vec<UttTrace>,
    encoder: Vec<BiTrace>,
    head: HeadTrace,
    pub soap_probs: Vec<Array1<f64>>,
    pub speaker_probs: Vec<Array1<f64>>,
}

fn softmax(z: Array1<f64>) -> Array1<f64> {
    let mut v = z.to_vec();
    softmax_in_place(&mut v);
    Array1::from(v)
}

/// Weighted cross entropy `-sum_c w_c t_c log p_c` and its gradient with respect to the logits.
pub fn weighted_ce(probs: &Array1<f64>, target: &[f64], weights: &[f64]) -> (f64, Array1<f64>) {
    let s: f64 = target.iter().zip(weights).map(|(t, w)| t * w).sum();
    let mut loss = 0.0;
    let mut d = probs * s;
    for c in 0..target.len() {
        if target[c] > 0.0 {
            loss -= weights[c] * target[c] * probs[c].max(1e-300).ln();
        }
        d[c] -= weights[c] * target[c];
    }
    (loss, d)
}

impl ModelParams {
    /// Forward pass over one transcript. `dropout = 0` is inference mode.
    pub fn forward(&self, table: &EmbeddingTable, utterances: &[Vec<usize>], dropout: f64, rng: &mut Rng) -> Result<Forward> {
        let mut utts = Vec::with_capacity(utterances.len());
        for ids in utterances {
            let mut layer_w = Vec::with_capacity(ids.len());
            let mut ls = Vec::with_capacity(ids.len());
            for &id in ids {
                let (l, a) = layer_attention(table.get(id), self.w_l.view());
                ls.push(l);
                layer_w.push(a);
            }
            let (u, alpha) = word_attention(&ls, self.w_w.as_ref().map(|w| w.view()))?;
            utts.push(UttTrace {
                ids: ids.clone(),
                layer_w,
                ls,
                alpha,
                u,
            });
        }
        let n = utts.len();
        let mut feats: Vec<Array1<f64>> = utts.iter().map(|u| u.u.clone()).collect();
        let mut encoder = Vec::with_capacity(self.encoder.len());
        for layer in &self.encoder {
            let mf = Masks::sample(rng, dropout, n, layer.fwd.input(), layer.fwd.hidden());
            let mb = Masks::sample(rng, dropout, n, layer.bwd.input(), layer.bwd.hidden());
            let (out, trace) = layer.forward(&feats, [&mf, &mb]);
            feats = out;
            encoder.push(trace);
        }
        let (head, soap_probs, speaker_probs) = match &self.head {
            Head::Dense { soap, speaker } => {
                let xs = feats;
                let sp: Vec<Array1<f64>> = xs.iter().map(|x| softmax(soap.forward(x))).collect();
                let kp: Vec<Array1<f64>> = xs.iter().map(|x| softmax(speaker.forward(x))).collect();
                (HeadTrace::Dense { xs }, sp, kp)
            }
            Head::Decoder {
                soap,
                soap_proj,
                speaker,
                speaker_proj,
            } => {
                let ms = Masks::sample(rng, dropout, n, soap.input(), soap.hidden());
                let mk = Masks::sample(rng, dropout, n, speaker.input(), speaker.hidden());
                let (soap_h, st) = soap.forward(&feats, &ms);
                let (speaker_h, kt) = speaker.forward(&feats, &mk);
                let sp = soap_h.iter().map(|h| softmax(soap_proj.forward(h))).collect();
                let kp = speaker_h.iter().map(|h| softmax(speaker_proj.forward(h))).collect();
                (
                    HeadTrace::Decoder {
                        soap: st,
                        soap_h,
                        speaker: kt,
                        speaker_h,
                    },
                    sp,
                    kp,
                )
            }
        };
        Ok(Forward {
            utts,
            encoder,
            head,
            soap_probs,
            speaker_probs,
        })
    }

    /// Gradients of all parameters given logit gradients for both heads.
    pub fn backward(
        &self,
        fwd: &Forward,
        table: &EmbeddingTable,
        d_soap: &[Array1<f64>],
        d_speaker: &[Array1<f64>],
        tbptt: usize,
    ) -> ModelParams {
        let mut grad = self.zeros_like();
        let mut dfeats: Vec<Array1<f64>> = match (&self.head, &fwd.head, &mut grad.head) {
            (Head::Dense { soap, speaker }, HeadTrace::Dense { xs }, Head::Dense { soap: gs, speaker: gk }) => xs
                .iter()
                .enumerate()
                .map(|(i, x)| soap.backward(x, &d_soap[i], gs) + speaker.backward(x, &d_speaker[i], gk))
                .collect(),
            (
                Head::Decoder {
                    soap,
                    soap_proj,
                    speaker,
                    speaker_proj,
                },
                HeadTrace::Decoder {
                    soap: st,
                    soap_h,
                    speaker: kt,
                    speaker_h,
                },
                Head::Decoder {
                    soap: gs,
                    soap_proj: gsp,
                    speaker: gk,
                    speaker_proj: gkp,
                },
            ) => {
                let dhs: Vec<Array1<f64>> = soap_h.iter().zip(d_soap).map(|(h, d)| soap_proj.backward(h, d, gsp)).collect();
                let dhk: Vec<Array1<f64>> = speaker_h
                    .iter()
                    .zip(d_speaker)
                    .map(|(h, d)| speaker_proj.backward(h, d, gkp))
                    .collect();
                let a = soap.backward(st, &dhs, tbptt, gs);
                let b = speaker.backward(kt, &dhk, tbptt, gk);
                a.into_iter().zip(b).map(|(a, b)| a + b).collect()
            }
            _ => unreachable!("trace and parameters come from the same head"),
        };
        for (l, layer) in self.encoder.iter().enumerate().rev() {
            dfeats = layer.backward(&fwd.encoder[l], &dfeats, tbptt, &mut grad.encoder[l]);
        }
        for (ut, du) in fwd.utts.iter().zip(&dfeats) {
            let (dls, dw) = word_attention_backward(&ut.ls, &ut.alpha, &ut.u, self.w_w.as_ref().map(|w| w.view()), du.view());
            if let (Some(dw), Some(g)) = (dw, grad.w_w.as_mut()) {
                *g += &dw;
            }
            for ((&id, a), dl) in ut.ids.iter().zip(&ut.layer_w).zip(&dls) {
                grad.w_l += &layer_attention_backward(table.get(id), a, dl.view());
            }
        }
        grad
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Summed weighted cross entropy over both tasks and all steps, with gradients.
    #[allow(clippy::too_many_arguments)]
    pub fn loss_and_grad(
        &self,
        table: &EmbeddingTable,
        t: &EncodedTranscript,
        soap_weights: &[f64],
        speaker_weights: &[f64],
        dropout: f64,
        tbptt: usize,
        rng: &mut Rng,
    ) -> Result<(f64, ModelParams)> {
        let fwd = self.forward(table, &t.utterances, dropout, rng)?;
        let mut loss = 0.0;
        let mut d_soap = Vec::with_capacity(t.len());
        let mut d_speaker = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            let (l1, d1) = weighted_ce(&fwd.soap_probs[i], &t.soap[i], soap_weights);
            let (l2, d2) = weighted_ce(&fwd.speaker_probs[i], &t.speaker[i], speaker_weights);
            loss += l1 + l2;
            d_soap.push(d1);
            d_speaker.push(d2);
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        Ok((loss, self.backward(&fwd, table, &d_soap, &d_speaker, tbptt)))
    }

    /// Loss only, no dropout.
    pub fn loss(&self, table: &EmbeddingTable, t: &EncodedTranscript, soap_weights: &[f64], speaker_weights: &[f64]) -> Result<f64> {
        let fwd = self.forward(table, &t.utterances, 0.0, &mut Rng::new(0))?;
        Ok((0..t.len())
            .map(|i| {
                weighted_ce(&fwd.soap_probs[i], &t.soap[i], soap_weights).0
                    + weighted_ce(&fwd.speaker_probs[i], &t.speaker[i], speaker_weights).0
            })
            .sum())
    }

    /// Inference: per-utterance (SOAP, speaker) probabilities.
    pub fn predict(&self, table: &EmbeddingTable, utterances: &[Vec<usize>]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let fwd = self.forward(table, utterances, 0.0, &mut Rng::new(0))?;
        Ok(fwd
            .soap_probs
            .into_iter()
            .zip(fwd.speaker_probs)
            .map(|(a, b)| (a.to_vec(), b.to_vec()))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

/// Five-point central-difference check of every parameter tensor on a small random
/// transcript with soft targets and non-uniform class weights.
pub fn gradient_check(cfg: &NetConfig, seed: u64, h: f64) -> Result<Vec<TensorCheck>> {
    cfg.validate()?;
    let mut rng = Rng::new(seed);
    let provider = super::embed::HashEmbedding { dim: cfg.dim, seed };
    let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let table = EmbeddingTable::build(&provider, words.iter().map(String::as_str));
    let n = 4;
    let utterances: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..rng.range_inclusive(1, 5)).map(|_| rng.below(words.len())).collect())
        .collect();
    let soft = |rng: &mut Rng, k: usize| {
        let raw: Vec<f64> = (0..k).map(|_| rng.uniform() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let t = EncodedTranscript {
        utterances,
        soap: (0..n).map(|_| soft(&mut rng, N_SECTIONS).try_into().expect("length")).collect(),
        speaker: (0..n).map(|_| soft(&mut rng, N_SPEAKERS).try_into().expect("length")).collect(),
    };
    let sw: Vec<f64> = (0..N_SECTIONS).map(|_| 0.5 + rng.uniform()).collect();
    let kw: Vec<f64> = (0..N_SPEAKERS).map(|_| 0.5 + rng.uniform()).collect();

    let mut params = ModelParams::new(cfg, &mut rng);
    for (_, mut tensor) in params.tensors_mut() {
        tensor.iter_mut().for_each(|x| *x = 0.3 * rng.normal());
    }
    let (_, grad) = params.loss_and_grad(&table, &t, &sw, &kw, 0.0, 0, &mut rng)?;
    let analytic = grad.flat();
    let mut out = Vec::new();
    let mut offset = 0;
    let mut probe = params.clone();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for (ti, name) in names.into_iter().enumerate() {
        let len = params.tensors()[ti].1.len();
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for j in 0..len {
            let g = analytic[offset + j];
            if g.abs() <= 1e-8 {
                continue;
            }
            let x0 = *params.tensors()[ti].1.iter().nth(j).expect("in range");
            let mut at = |delta: f64| -> Result<f64> {
                *probe.tensors_mut()[ti].1.iter_mut().nth(j).expect("in range") = x0 + delta;
                probe.loss(&table, &t, &sw, &kw)
            };
            let fd = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            *probe.tensors_mut()[ti].1.iter_mut().nth(j).expect("in range") = x0;
            checked += 1;
            let rel = (g - fd).abs() / g.abs().max(fd.abs());
            worst = worst.max(rel);
        }
        offset += len;
        out.push(TensorCheck {
            name,
            checked,
            max_rel_error: worst,
        });
    }
    Ok(out)
}
