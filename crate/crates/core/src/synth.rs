//! Seeded synthetic conversations with known labels, plus simulated ASR damage.
//!
//! Each utterance is built from a small per-section vocabulary, a per-speaker
//! vocabulary and shared function words. Under the context rule an utterance
//! instead continues the previous utterance's section and is written with
//! section-neutral filler, so only a model that sees the neighbours can label it.
//! Copying the previous section keeps the section marginals at their targets,
//! which makes the best achievable accuracy easy to work out.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::types::{SoapSection, SpeakerLabel, Transcript, TranscriptKind, Utterance, N_SECTIONS, N_SPEAKERS};
use crate::{Error, Result, Rng};

/// HT training split section shares (None, Subjective, Objective, Assessment, Plan).
pub const DEFAULT_SOAP_MARGINALS: [f64; N_SECTIONS] = [0.63, 0.19, 0.02, 0.12, 0.04];
/// HT training split speaker shares (Doctor, Patient, Caregiver, Other).
pub const DEFAULT_SPEAKER_MARGINALS: [f64; N_SPEAKERS] = [0.566, 0.383, 0.045, 0.006];

const SECTION_WORDS: [&[&str]; N_SECTIONS] = [
    &["weather", "traffic", "weekend", "game", "vacation", "movie", "coffee", "lunch", "garden", "football", "holiday", "birthday"],
    &["pain", "headache", "dizzy", "nausea", "cough", "fever", "swelling", "ache", "breath", "sore", "throbbing", "itching"],
    &["pressure", "pulse", "temperature", "weight", "exam", "lungs", "heart", "reflexes", "tender", "rash", "oxygen", "reading"],
    &["diagnosis", "likely", "infection", "hypertension", "diabetes", "consistent", "suspect", "condition", "migraine", "anemia", "bronchitis", "arthritis"],
    &["start", "increase", "refill", "referral", "followup", "appointment", "aspirin", "plavix", "dosage", "labs", "ultrasound", "therapy"],
];

const SPEAKER_WORDS: [&[&str]; N_SPEAKERS] = [
    &["recommend", "examine", "prescribe", "noted", "results", "review", "advise", "order", "schedule", "check"],
    &["feel", "felt", "hurts", "worried", "noticed", "sleep", "tired", "sometimes", "really", "honestly"],
    &["mom", "dad", "husband", "wife", "daughter", "son", "grandma", "helped", "drove", "watched"],
    &["nurse", "desk", "insurance", "parking", "form", "copay", "scan", "badge", "phone", "wristband"],
];

const FILLER_WORDS: &[&str] = &["okay", "yeah", "right", "sure", "alright", "mhm", "well", "understood", "exactly", "gotcha"];
const FUNCTION_WORDS: &[&str] = &["the", "and", "of", "to", "a", "in", "with", "about", "that", "this"];

/// Probability that a section word is swapped for another section's word.
const SECTION_WORD_NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    pub char_sub_rate: f64,
    pub char_del_rate: f64,
    pub char_ins_rate: f64,
    pub turn_merge_rate: f64,
    pub turn_split_rate: f64,
}

impl CorruptionConfig {
    pub fn none() -> Self {
        Self::default()
    }

    /// Character damage at overall rate `r`, mostly substitutions.
    pub fn chars(r: f64) -> Self {
        CorruptionConfig {
            char_sub_rate: 0.6 * r,
            char_del_rate: 0.2 * r,
            char_ins_rate: 0.2 * r,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("char_sub_rate", self.char_sub_rate),
            ("char_del_rate", self.char_del_rate),
            ("char_ins_rate", self.char_ins_rate),
            ("turn_merge_rate", self.turn_merge_rate),
            ("turn_split_rate", self.turn_split_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if self.char_sub_rate + self.char_del_rate > 1.0 {
            return Err(Error::InvalidInput("char_sub_rate + char_del_rate exceeds 1".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_transcripts: usize,
    pub min_utterances: usize,
    pub max_utterances: usize,
    pub soap_marginals: [f64; N_SECTIONS],
    pub speaker_marginals: [f64; N_SPEAKERS],
    pub context_rule_strength: f64,
    pub corruption: CorruptionConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_transcripts: 100,
            min_utterances: 20,
            max_utterances: 40,
            soap_marginals: DEFAULT_SOAP_MARGINALS,
            speaker_marginals: DEFAULT_SPEAKER_MARGINALS,
            context_rule_strength: 0.0,
            corruption: CorruptionConfig::none(),
            seed: 0,
        }
    }
}

fn check_marginals(name: &str, m: &[f64]) -> Result<()> {
    if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput(format!("{name} must be non-negative")));
    }
    let s: f64 = m.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_marginals("soap_marginals", &self.soap_marginals)?;
        check_marginals("speaker_marginals", &self.speaker_marginals)?;
        if !(0.0..=1.0).contains(&self.context_rule_strength) {
            return Err(Error::InvalidInput("context_rule_strength must lie in [0, 1]".into()));
        }
        if self.min_utterances == 0 || self.min_utterances > self.max_utterances {
            return Err(Error::InvalidInput("need 1 <= min_utterances <= max_utterances".into()));
        }
        self.corruption.validate()
    }
}

/// Words per utterance by speaker; doctors talk longer.
fn length_range(speaker: SpeakerLabel) -> (usize, usize) {
    match speaker {
        SpeakerLabel::Doctor => (8, 14),
        SpeakerLabel::Patient | SpeakerLabel::Caregiver => (4, 9),
        SpeakerLabel::Other => (3, 6),
    }
}

fn utterance_text(section: Option<SoapSection>, speaker: SpeakerLabel, rng: &mut Rng) -> String {
    let (lo, hi) = length_range(speaker);
    let len = rng.range_inclusive(lo, hi);
    let n_speaker = (len / 4).max(1);
    let n_topic = (len / 2).max(2);
    let mut words: Vec<&str> = Vec::with_capacity(len);
    for _ in 0..n_topic {
        let w = match section {
            Some(s) => {
                let mut pool = SECTION_WORDS[s.index()];
                if rng.bernoulli(SECTION_WORD_NOISE) {
                    pool = SECTION_WORDS[rng.below(N_SECTIONS)];
                }
                *rng.choose(pool)
            }
            None => *rng.choose(FILLER_WORDS),
        };
        words.push(w);
    }
    for _ in 0..n_speaker {
        words.push(*rng.choose(SPEAKER_WORDS[speaker.index()]));
    }
    while words.len() < len {
        words.push(*rng.choose(FUNCTION_WORDS));
    }
    rng.shuffle(&mut words);
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        let upper = first.to_uppercase();
        text.replace_range(..1, &upper);
    }
    text.push(if rng.bernoulli(0.2) { '?' } else { '.' });
    text
}

/// One labeled reference transcript.
pub fn generate_transcript(encounter_id: &str, cfg: &SynthConfig, rng: &mut Rng) -> Transcript {
    let n = rng.range_inclusive(cfg.min_utterances, cfg.max_utterances);
    let mut utterances = Vec::with_capacity(n);
    let mut prev: Option<SoapSection> = None;
    for id in 0..n {
        let speaker = SpeakerLabel::ALL[rng.categorical(&cfg.speaker_marginals)];
        let contextual = prev.is_some() && rng.bernoulli(cfg.context_rule_strength);
        let (section, text) = if contextual {
            let s = prev.expect("checked above");
            (s, utterance_text(None, speaker, rng))
        } else {
            let s = SoapSection::ALL[rng.categorical(&cfg.soap_marginals)];
            (s, utterance_text(Some(s), speaker, rng))
        };
        prev = Some(section);
        utterances.push(Utterance::reference(id, speaker, section, text));
    }
    Transcript {
        encounter_id: encounter_id.to_string(),
        kind: TranscriptKind::Reference,
        utterances,
    }
}

/// Reference corpus; transcript `i` draws from stream `i` of the seed, so the
/// result does not depend on thread count.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<Transcript>> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    Ok((0..cfg.n_transcripts)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.split(i as u64);
            generate_transcript(&format!("enc{i:05}"), cfg, &mut rng)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    Sub,
    Del,
    Ins,
    Merge,
    Split,
}

/// Ground-truth damage record. `ref_pos` indexes the reference joined text and
/// `asr_pos` the corrupted text; a deletion's `asr_pos` is where the char would have been.
/// Splits carry `usize::MAX` as `ref_pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEvent {
    pub kind: CorruptionKind,
    pub ref_pos: usize,
    pub asr_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptedTranscript {
    pub encounter_id: String,
    pub text: String,
    pub turns: Vec<[usize; 2]>,
    pub events: Vec<CorruptionEvent>,
}

impl CorruptedTranscript {
    pub fn raw_asr(&self) -> crate::project::RawAsr {
        crate::project::RawAsr {
            encounter_id: self.encounter_id.clone(),
            text: self.text.clone(),
            turns: self.turns.clone(),
        }
    }

    pub fn turn_ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.turns.iter().map(|t| t[0]..t[1]).collect()
    }

    pub fn count(&self, kind: CorruptionKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

fn random_letter(rng: &mut Rng, not: Option<char>) -> char {
    loop {
        let c = (b'a' + rng.below(26) as u8) as char;
        if Some(c) != not.map(|n| n.to_ascii_lowercase()) {
            return c;
        }
    }
}

/// Simulated ASR output for a reference transcript.
///
/// Turns start as runs of same-speaker utterances. Merging two turns also drops
/// the sentence-final punctuation at the seam, as a recognizer segmenting by
/// turn would. Character damage touches letters only, so spaces and
/// punctuation survive. Splits cut a turn at a random interior space.
pub fn corrupt(transcript: &Transcript, cfg: &CorruptionConfig, rng: &mut Rng) -> Result<CorruptedTranscript> {
    cfg.validate()?;
    let utts = &transcript.utterances;
    let speakers: Vec<SpeakerLabel> = utts
        .iter()
        .map(|u| u.labels.distribution().speaker_argmax())
        .collect();

    // turn_start[i]: utterance i opens a turn
    let mut turn_start = vec![false; utts.len()];
    let mut strip_punct = vec![false; utts.len()];
    let mut merged_at = Vec::new();
    for i in 0..utts.len() {
        if i == 0 || speakers[i] != speakers[i - 1] {
            turn_start[i] = true;
            if i > 0 && rng.bernoulli(cfg.turn_merge_rate) {
                turn_start[i] = false;
                strip_punct[i - 1] = true;
                merged_at.push(i);
            }
        }
    }

    let mut text: Vec<char> = Vec::new();
    let mut events = Vec::new();
    let mut ref_pos = 0usize;
    let mut utt_start = Vec::with_capacity(utts.len());
    for (i, u) in utts.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            ref_pos += 1;
        }
        utt_start.push(text.len());
        if merged_at.contains(&i) {
            events.push(CorruptionEvent {
                kind: CorruptionKind::Merge,
                ref_pos: ref_pos.saturating_sub(1),
                asr_pos: text.len().saturating_sub(1),
            });
        }
        let chars: Vec<char> = u.text.chars().collect();
        let n = chars.len();
        for (k, &c) in chars.iter().enumerate() {
            let last = k + 1 == n;
            if last && strip_punct[i] && matches!(c, '.' | '?' | '!') {
                events.push(CorruptionEvent {
                    kind: CorruptionKind::Del,
                    ref_pos,
                    asr_pos: text.len(),
                });
                ref_pos += 1;
                continue;
            }
            if !c.is_alphabetic() {
                text.push(c);
                ref_pos += 1;
                continue;
            }
            let x = rng.uniform();
            if x < cfg.char_sub_rate {
                events.push(CorruptionEvent { kind: CorruptionKind::Sub, ref_pos, asr_pos: text.len() });
                text.push(random_letter(rng, Some(c)));
            } else if x < cfg.char_sub_rate + cfg.char_del_rate {
                events.push(CorruptionEvent { kind: CorruptionKind::Del, ref_pos, asr_pos: text.len() });
            } else {
                text.push(c);
            }
            ref_pos += 1;
            if rng.bernoulli(cfg.char_ins_rate) {
                events.push(CorruptionEvent { kind: CorruptionKind::Ins, ref_pos, asr_pos: text.len() });
                text.push(random_letter(rng, None));
            }
        }
    }

    // Each turn owns the separator space that follows it.
    let mut bounds: Vec<usize> = (0..utts.len()).filter(|&i| turn_start[i]).map(|i| utt_start[i]).collect();
    bounds.push(text.len());
    let mut turns: Vec<[usize; 2]> = Vec::new();
    for w in bounds.windows(2) {
        let (s, e) = (w[0], w[1]);
        if rng.bernoulli(cfg.turn_split_rate) {
            let content_end = if e < text.len() { e - 1 } else { e };
            let spaces: Vec<usize> = (s + 1..content_end).filter(|&k| text[k] == ' ').collect();
            if !spaces.is_empty() {
                let cut = *rng.choose(&spaces) + 1;
                events.push(CorruptionEvent { kind: CorruptionKind::Split, ref_pos: usize::MAX, asr_pos: cut });
                turns.push([s, cut]);
                turns.push([cut, e]);
                continue;
            }
        }
        turns.push([s, e]);
    }
    if turns.is_empty() {
        turns.push([0, 0]);
    }

    Ok(CorruptedTranscript {
        encounter_id: transcript.encounter_id.clone(),
        text: text.into_iter().collect(),
        turns,
        events,
    })
}

/// Corrupt every transcript; transcript `i` uses stream `i` of `seed`.
pub fn corrupt_corpus(transcripts: &[Transcript], cfg: &CorruptionConfig, seed: u64) -> Result<Vec<CorruptedTranscript>> {
    let root = Rng::new(seed);
    transcripts
        .par_iter()
        .enumerate()
        .map(|(i, t)| corrupt(t, cfg, &mut root.split(i as u64)))
        .collect()
}
