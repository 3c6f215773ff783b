//! Domain types shared by every stage of the pipeline.
//!
//! Class enums have a fixed index order. Every probability vector in the crate
//! (targets, model outputs, metric inputs) is laid out in that order, so index 0
//! of a SOAP vector is always [`SoapSection::None`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const N_SECTIONS: usize = 5;
pub const N_SPEAKERS: usize = 4;

/// SOAP note section an utterance was cited under, or `None` when it was not cited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoapSection {
    None,
    Subjective,
    Objective,
    Assessment,
    Plan,
}

impl SoapSection {
    pub const ALL: [SoapSection; N_SECTIONS] = [
        SoapSection::None,
        SoapSection::Subjective,
        SoapSection::Objective,
        SoapSection::Assessment,
        SoapSection::Plan,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SoapSection::None => "none",
            SoapSection::Subjective => "subjective",
            SoapSection::Objective => "objective",
            SoapSection::Assessment => "assessment",
            SoapSection::Plan => "plan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerLabel {
    Doctor,
    Patient,
    Caregiver,
    Other,
}

impl SpeakerLabel {
    pub const ALL: [SpeakerLabel; N_SPEAKERS] = [
        SpeakerLabel::Doctor,
        SpeakerLabel::Patient,
        SpeakerLabel::Caregiver,
        SpeakerLabel::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerLabel::Doctor => "doctor",
            SpeakerLabel::Patient => "patient",
            SpeakerLabel::Caregiver => "caregiver",
            SpeakerLabel::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?}", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for SoapSection {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl FromStr for SpeakerLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for SoapSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for SpeakerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Soft targets attached to an ASR utterance by label projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    pub soap: [f64; N_SECTIONS],
    pub speaker: [f64; N_SPEAKERS],
}

impl LabelDistribution {
    pub fn one_hot(section: SoapSection, speaker: SpeakerLabel) -> Self {
        let mut soap = [0.0; N_SECTIONS];
        soap[section.index()] = 1.0;
        let mut spk = [0.0; N_SPEAKERS];
        spk[speaker.index()] = 1.0;
        LabelDistribution { soap, speaker: spk }
    }

    pub fn soap_argmax(&self) -> SoapSection {
        SoapSection::ALL[argmax(&self.soap)]
    }

    pub fn speaker_argmax(&self) -> SpeakerLabel {
        SpeakerLabel::ALL[argmax(&self.speaker)]
    }
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptKind {
    Reference,
    Asr,
}

/// Hard labels on reference utterances, projected distributions on ASR utterances.
#[derive(Debug, Clone, PartialEq)]
pub enum UtteranceLabels {
    Hard {
        speaker: SpeakerLabel,
        section: SoapSection,
    },
    Soft(LabelDistribution),
}

impl UtteranceLabels {
    pub fn distribution(&self) -> LabelDistribution {
        match self {
            UtteranceLabels::Hard { speaker, section } => LabelDistribution::one_hot(*section, *speaker),
            UtteranceLabels::Soft(d) => d.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: usize,
    pub text: String,
    pub labels: UtteranceLabels,
    /// Filled by preprocessing; empty until then.
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn reference(id: usize, speaker: SpeakerLabel, section: SoapSection, text: impl Into<String>) -> Self {
        Utterance {
            id,
            text: text.into(),
            labels: UtteranceLabels::Hard { speaker, section },
            tokens: Vec::new(),
        }
    }

    pub fn asr(id: usize, text: impl Into<String>, dist: LabelDistribution) -> Self {
        Utterance {
            id,
            text: text.into(),
            labels: UtteranceLabels::Soft(dist),
            tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub encounter_id: String,
    pub kind: TranscriptKind,
    pub utterances: Vec<Utterance>,
}

impl Transcript {
    /// Reference text as the aligner sees it: utterances joined by single spaces.
    pub fn joined_text(&self) -> String {
        let mut out = String::new();
        for (i, u) in self.utterances.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&u.text);
        }
        out
    }

    /// Check the structural invariants: at least one utterance, dense ids, labels matching the kind.
    pub fn validate(&self) -> crate::Result<()> {
        if self.utterances.is_empty() {
            return Err(crate::Error::Invariant(format!(
                "transcript {} has no utterances",
                self.encounter_id
            )));
        }
        for (i, u) in self.utterances.iter().enumerate() {
            if u.id != i {
                return Err(crate::Error::Invariant(format!(
                    "transcript {}: utterance ids are not dense at position {i}",
                    self.encounter_id
                )));
            }
            let ok = matches!(
                (self.kind, &u.labels),
                (TranscriptKind::Reference, UtteranceLabels::Hard { .. })
                    | (TranscriptKind::Asr, UtteranceLabels::Soft(_))
            );
            if !ok {
                return Err(crate::Error::Invariant(format!(
                    "transcript {}: utterance {i} labels do not match transcript kind",
                    self.encounter_id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enum_orders_are_canonical() {
        assert_eq!(SoapSection::None.index(), 0);
        assert_eq!(SoapSection::Plan.index(), 4);
        assert_eq!(SpeakerLabel::Other.index(), 3);
        for s in SoapSection::ALL {
            assert_eq!(s.as_str().parse::<SoapSection>().unwrap(), s);
        }
        assert!("Plann".parse::<SoapSection>().is_err());
    }

    #[test]
    fn joined_text_uses_single_spaces() {
        let t = Transcript {
            encounter_id: "e".into(),
            kind: TranscriptKind::Reference,
            utterances: vec![
                Utterance::reference(0, SpeakerLabel::Doctor, SoapSection::None, "Hi."),
                Utterance::reference(1, SpeakerLabel::Patient, SoapSection::None, "Hello."),
            ],
        };
        assert_eq!(t.joined_text(), "Hi. Hello.");
    }
}
