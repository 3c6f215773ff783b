//! Model-ready view of a corpus: preprocessed tokens plus per-task target vectors.

use serde::{Deserialize, Serialize};

use crate::preprocess::{preprocess_text, PreprocessConfig};
use crate::types::{Transcript, TranscriptKind, N_SECTIONS, N_SPEAKERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Soap,
    Speaker,
}

impl Task {
    pub const BOTH: [Task; 2] = [Task::Soap, Task::Speaker];

    pub fn n_classes(self) -> usize {
        match self {
            Task::Soap => N_SECTIONS,
            Task::Speaker => N_SPEAKERS,
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Soap => crate::types::SoapSection::ALL.iter().map(|s| s.as_str()).collect(),
            Task::Speaker => crate::types::SpeakerLabel::ALL.iter().map(|s| s.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Exactly `max_tokens` entries, padded with the pad token.
    pub tokens: Vec<String>,
    pub soap: [f64; N_SECTIONS],
    /// Always sums to 1 (L2-normalized projections are rescaled here).
    pub speaker: [f64; N_SPEAKERS],
}

impl Example {
    pub fn target(&self, task: Task) -> &[f64] {
        match task {
            Task::Soap => &self.soap,
            Task::Speaker => &self.speaker,
        }
    }

    /// Gold class id: the target's argmax.
    pub fn gold(&self, task: Task) -> usize {
        crate::types::argmax(self.target(task))
    }

    pub fn real_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(|t| !t.is_empty()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTranscript {
    pub encounter_id: String,
    pub kind: TranscriptKind,
    pub examples: Vec<Example>,
}

fn l1(v: [f64; N_SPEAKERS]) -> [f64; N_SPEAKERS] {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.map(|x| x / s)
    } else {
        [1.0 / N_SPEAKERS as f64; N_SPEAKERS]
    }
}

/// Preprocess and attach targets. Utterances without words are dropped, as are
/// transcripts left empty.
pub fn label_corpus(transcripts: &[Transcript], cfg: &PreprocessConfig) -> Vec<LabeledTranscript> {
    transcripts
        .iter()
        .filter_map(|t| {
            let examples: Vec<Example> = t
                .utterances
                .iter()
                .filter_map(|u| {
                    let tokens = if u.tokens.len() == cfg.max_tokens {
                        u.tokens.clone()
                    } else {
                        preprocess_text(&u.text, cfg)?
                    };
                    let d = u.labels.distribution();
                    Some(Example {
                        tokens,
                        soap: d.soap,
                        speaker: l1(d.speaker),
                    })
                })
                .collect();
            (!examples.is_empty()).then(|| LabeledTranscript {
                encounter_id: t.encounter_id.clone(),
                kind: t.kind,
                examples,
            })
        })
        .collect()
}

/// Expected class counts (sum of target probabilities) over a set of examples.
pub fn expected_counts<'a>(examples: impl IntoIterator<Item = &'a Example>, task: Task) -> Vec<f64> {
    let mut counts = vec![0.0; task.n_classes()];
    for e in examples {
        for (c, t) in counts.iter_mut().zip(e.target(task)) {
            *c += t;
        }
    }
    counts
}

/// Inverse class-frequency weights `n / (C * n_c)`; classes with no mass get 1.
pub fn inverse_frequency_weights(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let c = counts.len() as f64;
    counts
        .iter()
        .map(|&n| if n > 0.0 { total / (c * n) } else { 1.0 })
        .collect()
}

/// Split off the last `fraction` of transcripts (at least one when there are two or more).
pub fn split_tail<T: Clone>(items: &[T], fraction: f64) -> (Vec<T>, Vec<T>) {
    if items.len() < 2 {
        return (items.to_vec(), Vec::new());
    }
    let n_tail = ((items.len() as f64 * fraction).ceil() as usize).clamp(1, items.len() - 1);
    let cut = items.len() - n_tail;
    (items[..cut].to_vec(), items[cut..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_frequency_ratio() {
        let w = inverse_frequency_weights(&[4.0, 1.0]);
        assert!((w[1] / w[0] - 4.0).abs() < 1e-12);
        let w = inverse_frequency_weights(&[4.0, 0.0, 1.0]);
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn split_tail_takes_ten_percent() {
        let v: Vec<usize> = (0..20).collect();
        let (a, b) = split_tail(&v, 0.1);
        assert_eq!(a.len(), 18);
        assert_eq!(b, vec![18, 19]);
        let (a, b) = split_tail(&[1], 0.1);
        assert_eq!((a.len(), b.len()), (1, 0));
    }
}
