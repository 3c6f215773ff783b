//! Projection of reference utterance labels onto utterances rebuilt from ASR output.
//!
//! Each ASR word takes the label mix of the reference characters it aligns to,
//! scaled by how well the two segments agree. Sentence targets are word means;
//! SOAP mass that the words do not claim goes to `None`.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{align_transcripts, AlignOp, CharAlignment};
use crate::types::{
    LabelDistribution, SoapSection, SpeakerLabel, Transcript, TranscriptKind, Utterance, UtteranceLabels,
    N_SECTIONS, N_SPEAKERS,
};
use crate::{Error, Result};

/// Abbreviations whose trailing period never ends a sentence.
pub const ABBREVIATIONS: &[&str] = &["dr.", "mr.", "mrs.", "ms.", "mg.", "e.g.", "i.e."];

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerNorm {
    /// Divide by the Euclidean norm. Output is a unit vector, not a simplex point.
    #[default]
    L2,
    /// Divide by the sum.
    L1,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub speaker_norm: SpeakerNorm,
}

/// (section, speaker) carried by one reference character; `None` for separators.
pub type CharLabel = Option<(SoapSection, SpeakerLabel)>;

#[derive(Debug, Clone, PartialEq)]
pub struct WordLabelStats {
    pub word_span: Range<usize>,
    /// Per-section mass, `fraction * confidence`.
    pub soap: [f64; N_SECTIONS],
    pub speaker: [f64; N_SPEAKERS],
    pub confidence: f64,
}

impl WordLabelStats {
    fn empty(word_span: Range<usize>) -> Self {
        WordLabelStats {
            word_span,
            soap: [0.0; N_SECTIONS],
            speaker: [0.0; N_SPEAKERS],
            confidence: 0.0,
        }
    }
}

/// Label mass of each ASR word from the reference span it aligns to.
///
/// The aligned reference span runs from the first to the last reference char
/// paired (match or substitution) with the word, widened over deleted non-space
/// reference chars directly adjacent to it. Confidence is the number of matched
/// chars over the longer of the two segments.
pub fn word_label_probs(
    alignment: &CharAlignment,
    reference: &[char],
    ref_labels: &[CharLabel],
    asr_words: &[Range<usize>],
) -> Vec<WordLabelStats> {
    let pairs: Vec<_> = alignment.pairs().collect();
    // op index of every asr char
    let mut op_of_asr = vec![usize::MAX; alignment.asr_len];
    for (k, p) in pairs.iter().enumerate() {
        if let Some(a) = p.asr_pos {
            op_of_asr[a] = k;
        }
    }

    asr_words
        .iter()
        .map(|w| {
            if w.is_empty() {
                return WordLabelStats::empty(w.clone());
            }
            let first_op = op_of_asr[w.start];
            let last_op = op_of_asr[w.end - 1];
            let mut lo = usize::MAX;
            let mut hi = 0usize;
            let mut matches = 0usize;
            for p in &pairs[first_op..=last_op] {
                match (p.op, p.ref_pos) {
                    (AlignOp::Match, Some(r)) | (AlignOp::Substitute, Some(r)) => {
                        lo = lo.min(r);
                        hi = hi.max(r);
                        if p.op == AlignOp::Match {
                            matches += 1;
                        }
                    }
                    _ => {}
                }
            }
            if lo == usize::MAX {
                return WordLabelStats::empty(w.clone());
            }
            let deleted_nonspace =
                |p: &crate::align::AlignedPair| p.op == AlignOp::Delete && !reference[p.ref_pos.unwrap()].is_whitespace();
            let mut k = first_op;
            while k > 0 && deleted_nonspace(&pairs[k - 1]) {
                k -= 1;
                lo = lo.min(pairs[k].ref_pos.unwrap());
            }
            let mut k = last_op;
            while k + 1 < pairs.len() && deleted_nonspace(&pairs[k + 1]) {
                k += 1;
                hi = hi.max(pairs[k].ref_pos.unwrap());
            }

            let ref_span = lo..hi + 1;
            let confidence = matches as f64 / w.len().max(ref_span.len()) as f64;
            let mut soap = [0.0; N_SECTIONS];
            let mut speaker = [0.0; N_SPEAKERS];
            let mut nonspace = 0usize;
            for r in ref_span {
                if reference[r].is_whitespace() {
                    continue;
                }
                nonspace += 1;
                if let Some((sec, spk)) = ref_labels[r] {
                    soap[sec.index()] += 1.0;
                    speaker[spk.index()] += 1.0;
                }
            }
            if nonspace > 0 {
                let scale = confidence / nonspace as f64;
                soap.iter_mut().for_each(|x| *x *= scale);
                speaker.iter_mut().for_each(|x| *x *= scale);
            }
            WordLabelStats {
                word_span: w.clone(),
                soap,
                speaker,
                confidence,
            }
        })
        .collect()
}

/// Maximal non-whitespace runs inside `span`.
pub fn word_spans(text: &[char], span: Range<usize>) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for i in span.clone() {
        match (text[i].is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..span.end);
    }
    out
}

/// A sentence recovered from one diarized speaker turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsrSegment {
    pub turn_id: usize,
    /// Char range in the full ASR text, trimmed of surrounding whitespace.
    pub span: Range<usize>,
    pub text: String,
}

/// Split each speaker turn into sentences at `.`, `?` or `!` followed by
/// whitespace or the end of the turn, except after a guarded abbreviation.
pub fn reconstruct_utterances(asr_text: &str, speaker_turns: &[Range<usize>]) -> Vec<AsrSegment> {
    let chars: Vec<char> = asr_text.chars().collect();
    let mut out = Vec::new();
    for (turn_id, turn) in speaker_turns.iter().enumerate() {
        let mut start = turn.start;
        for k in turn.clone() {
            if !matches!(chars[k], '.' | '?' | '!') {
                continue;
            }
            if k + 1 < turn.end && !chars[k + 1].is_whitespace() {
                continue;
            }
            let mut tok_start = k;
            while tok_start > start && !chars[tok_start - 1].is_whitespace() {
                tok_start -= 1;
            }
            let token: String = chars[tok_start..=k].iter().collect::<String>().to_lowercase();
            if ABBREVIATIONS.contains(&token.as_str()) {
                continue;
            }
            push_segment(&chars, turn_id, start..k + 1, &mut out);
            start = k + 1;
        }
        push_segment(&chars, turn_id, start..turn.end, &mut out);
    }
    out
}

fn push_segment(chars: &[char], turn_id: usize, span: Range<usize>, out: &mut Vec<AsrSegment>) {
    let mut s = span.start;
    let mut e = span.end;
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    if s < e {
        out.push(AsrSegment {
            turn_id,
            span: s..e,
            text: chars[s..e].iter().collect(),
        });
    }
}

/// Residual normalization: `None` absorbs `1 - sum(content)`.
///
/// `raw` holds Subjective, Objective, Assessment and Plan mass in that order.
pub fn normalize_soap(raw: [f64; 4]) -> Result<[f64; N_SECTIONS]> {
    if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Invariant(format!("negative or non-finite SOAP mass {raw:?}")));
    }
    let mut content = raw;
    let sum: f64 = content.iter().sum();
    if sum > 1.0 + SUM_TOLERANCE {
        return Err(Error::Invariant(format!("SOAP content mass {sum} exceeds 1")));
    }
    if sum > 1.0 {
        content.iter_mut().for_each(|x| *x /= sum);
    }
    let none = (1.0 - content.iter().sum::<f64>()).max(0.0);
    Ok([none, content[0], content[1], content[2], content[3]])
}

/// All-zero input falls back to the uniform vector in either mode.
pub fn normalize_speaker(raw: [f64; N_SPEAKERS], mode: SpeakerNorm) -> [f64; N_SPEAKERS] {
    let norm = match mode {
        SpeakerNorm::L2 => raw.iter().map(|x| x * x).sum::<f64>().sqrt(),
        SpeakerNorm::L1 => raw.iter().sum::<f64>(),
    };
    if norm <= 0.0 || !norm.is_finite() {
        return [1.0 / N_SPEAKERS as f64; N_SPEAKERS];
    }
    raw.map(|x| x / norm)
}

/// Mean of the word vectors, then SOAP residual and speaker normalization.
pub fn utterance_distributions(words: &[WordLabelStats], mode: SpeakerNorm) -> Result<LabelDistribution> {
    if words.is_empty() {
        return Err(Error::InvalidInput("utterance has no words".into()));
    }
    let n = words.len() as f64;
    let mut soap = [0.0; N_SECTIONS];
    let mut speaker = [0.0; N_SPEAKERS];
    for w in words {
        for (acc, x) in soap.iter_mut().zip(&w.soap) {
            *acc += x;
        }
        for (acc, x) in speaker.iter_mut().zip(&w.speaker) {
            *acc += x;
        }
    }
    let soap = soap.map(|x| x / n);
    let speaker = speaker.map(|x| x / n);
    Ok(LabelDistribution {
        soap: normalize_soap([soap[1], soap[2], soap[3], soap[4]])?,
        speaker: normalize_speaker(speaker, mode),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsrUtterance {
    pub turn_id: usize,
    pub span: Range<usize>,
    pub text: String,
    pub word_stats: Vec<WordLabelStats>,
    pub targets: LabelDistribution,
}

/// Per-character labels of a reference transcript laid out as [`Transcript::joined_text`].
pub fn reference_char_labels(reference: &Transcript) -> Result<(Vec<char>, Vec<CharLabel>)> {
    let mut chars = Vec::new();
    let mut labels = Vec::new();
    for (i, u) in reference.utterances.iter().enumerate() {
        let UtteranceLabels::Hard { speaker, section } = u.labels else {
            return Err(Error::InvalidInput(format!(
                "{}: projection needs a reference transcript with hard labels",
                reference.encounter_id
            )));
        };
        if i > 0 {
            chars.push(' ');
            labels.push(None);
        }
        for c in u.text.chars() {
            chars.push(c);
            labels.push(Some((section, speaker)));
        }
    }
    Ok((chars, labels))
}

fn check_turns(turns: &[Range<usize>], len: usize) -> Result<()> {
    let mut pos = 0;
    for t in turns {
        if t.start != pos || t.end < t.start {
            return Err(Error::InvalidInput(format!("speaker turns do not tile the ASR text at {pos}")));
        }
        pos = t.end;
    }
    if pos != len {
        return Err(Error::InvalidInput(format!(
            "speaker turns cover {pos} of {len} ASR characters"
        )));
    }
    Ok(())
}

/// Full projection with per-word detail.
pub fn project_detailed(
    reference: &Transcript,
    asr_text: &str,
    turns: &[Range<usize>],
    cfg: &ProjectConfig,
) -> Result<Vec<AsrUtterance>> {
    let (ref_chars, ref_labels) = reference_char_labels(reference)?;
    let asr_chars: Vec<char> = asr_text.chars().collect();
    check_turns(turns, asr_chars.len())?;
    let ref_text: String = ref_chars.iter().collect();
    let alignment = align_transcripts(&ref_text, asr_text);

    let segments = reconstruct_utterances(asr_text, turns);
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let words = word_spans(&asr_chars, seg.span.clone());
        let word_stats = word_label_probs(&alignment, &ref_chars, &ref_labels, &words);
        let targets = utterance_distributions(&word_stats, cfg.speaker_norm)?;
        out.push(AsrUtterance {
            turn_id: seg.turn_id,
            span: seg.span,
            text: seg.text,
            word_stats,
            targets,
        });
    }
    Ok(out)
}

/// Project a reference transcript onto ASR text and its diarized turns.
pub fn project_corpus(
    reference: &Transcript,
    asr_text: &str,
    turns: &[Range<usize>],
    cfg: &ProjectConfig,
) -> Result<Transcript> {
    let utterances = project_detailed(reference, asr_text, turns, cfg)?
        .into_iter()
        .enumerate()
        .map(|(id, u)| Utterance::asr(id, u.text, u.targets))
        .collect();
    Ok(Transcript {
        encounter_id: reference.encounter_id.clone(),
        kind: TranscriptKind::Asr,
        utterances,
    })
}

/// Raw ASR input: text plus diarized turn boundaries (char offsets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAsr {
    pub encounter_id: String,
    pub text: String,
    pub turns: Vec<[usize; 2]>,
}

impl RawAsr {
    pub fn turn_ranges(&self) -> Vec<Range<usize>> {
        self.turns.iter().map(|t| t[0]..t[1]).collect()
    }
}

pub fn read_raw_asr(path: impl AsRef<Path>) -> Result<Vec<RawAsr>> {
    crate::corpus::read_jsonl(path.as_ref())
}

pub fn write_raw_asr(records: &[RawAsr], path: impl AsRef<Path>) -> Result<()> {
    crate::corpus::write_jsonl(records, path.as_ref())
}
