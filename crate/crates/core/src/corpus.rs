//! Line-delimited corpus files, one encounter per line.
//!
//! ```text
//! {"encounter_id":"e1","kind":"reference","utterances":[{"id":0,"speaker":"doctor","section":"plan","text":"..."}]}
//! {"encounter_id":"e1","kind":"asr","utterances":[{"id":0,"soap_dist":[..5],"speaker_dist":[..4],"text":"..."}]}
//! ```
//!
//! Floats are written in shortest round-trip form, so re-reading is bit exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{
    LabelDistribution, SoapSection, SpeakerLabel, Transcript, TranscriptKind, Utterance, UtteranceLabels,
    N_SECTIONS, N_SPEAKERS,
};
use crate::{Error, Result};

const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptRecord {
    encounter_id: String,
    kind: String,
    utterances: Vec<UtteranceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceRecord {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    section: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    soap_dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker_dist: Option<Vec<f64>>,
    text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tokens: Vec<String>,
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Transcript>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus_from(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus_from(reader: impl BufRead) -> Result<Vec<Transcript>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_transcript_line(&line, line_no)?);
    }
    Ok(out)
}

pub fn parse_corpus(text: &str) -> Result<Vec<Transcript>> {
    read_corpus_from(text.as_bytes())
}

/// Parse a single corpus record. `line_no` is only used for error messages.
pub fn parse_transcript_line(line: &str, line_no: usize) -> Result<Transcript> {
    let rec: TranscriptRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let kind = match rec.kind.as_str() {
        "reference" => TranscriptKind::Reference,
        "asr" => TranscriptKind::Asr,
        other => return Err(validation(line_no, "kind", other)),
    };
    let mut utterances = Vec::with_capacity(rec.utterances.len());
    // ids are reindexed densely in file order
    for (id, u) in rec.utterances.into_iter().enumerate() {
        let labels = match kind {
            TranscriptKind::Reference => {
                let speaker = required(u.speaker, line_no, "speaker")?;
                let section = required(u.section, line_no, "section")?;
                UtteranceLabels::Hard {
                    speaker: speaker
                        .parse::<SpeakerLabel>()
                        .map_err(|_| validation(line_no, "speaker", &speaker))?,
                    section: section
                        .parse::<SoapSection>()
                        .map_err(|_| validation(line_no, "section", &section))?,
                }
            }
            TranscriptKind::Asr => {
                let soap = required(u.soap_dist, line_no, "soap_dist")?;
                let speaker = required(u.speaker_dist, line_no, "speaker_dist")?;
                UtteranceLabels::Soft(LabelDistribution {
                    soap: to_array::<N_SECTIONS>(&soap, line_no, "soap_dist", true)?,
                    speaker: to_array::<N_SPEAKERS>(&speaker, line_no, "speaker_dist", false)?,
                })
            }
        };
        utterances.push(Utterance {
            id,
            text: u.text,
            labels,
            tokens: u.tokens,
        });
    }
    Ok(Transcript {
        encounter_id: rec.encounter_id,
        kind,
        utterances,
    })
}

fn validation(line: usize, field: &str, value: &str) -> Error {
    Error::Validation {
        line,
        field: field.to_string(),
        value: value.to_string(),
    }
}

fn required<T>(v: Option<T>, line: usize, field: &str) -> Result<T> {
    v.ok_or_else(|| validation(line, field, "<missing>"))
}

fn to_array<const N: usize>(v: &[f64], line: usize, field: &str, sums_to_one: bool) -> Result<[f64; N]> {
    let arr: [f64; N] = v
        .try_into()
        .map_err(|_| validation(line, field, &format!("{v:?}")))?;
    if arr.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(validation(line, field, &format!("{v:?}")));
    }
    if sums_to_one && (arr.iter().sum::<f64>() - 1.0).abs() > DIST_TOLERANCE {
        return Err(validation(line, field, &format!("{v:?}")));
    }
    Ok(arr)
}

fn to_record(t: &Transcript) -> TranscriptRecord {
    TranscriptRecord {
        encounter_id: t.encounter_id.clone(),
        kind: match t.kind {
            TranscriptKind::Reference => "reference",
            TranscriptKind::Asr => "asr",
        }
        .to_string(),
        utterances: t
            .utterances
            .iter()
            .map(|u| {
                let mut rec = UtteranceRecord {
                    id: u.id,
                    speaker: None,
                    section: None,
                    soap_dist: None,
                    speaker_dist: None,
                    text: u.text.clone(),
                    tokens: u.tokens.clone(),
                };
                match &u.labels {
                    UtteranceLabels::Hard { speaker, section } => {
                        rec.speaker = Some(speaker.as_str().to_string());
                        rec.section = Some(section.as_str().to_string());
                    }
                    UtteranceLabels::Soft(d) => {
                        rec.soap_dist = Some(d.soap.to_vec());
                        rec.speaker_dist = Some(d.speaker.to_vec());
                    }
                }
                rec
            })
            .collect(),
    }
}

pub fn transcript_to_line(t: &Transcript) -> String {
    serde_json::to_string(&to_record(t)).expect("corpus records always serialize")
}

pub fn write_corpus_to(transcripts: &[Transcript], mut w: impl Write) -> std::io::Result<()> {
    for t in transcripts {
        writeln!(w, "{}", transcript_to_line(t))?;
    }
    w.flush()
}

pub fn write_corpus(transcripts: &[Transcript], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus_to(transcripts, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Generic line-delimited JSON helpers for the sidecar formats (raw ASR, notes, dumps).
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_utterances() -> Transcript {
        Transcript {
            encounter_id: "enc-1".into(),
            kind: TranscriptKind::Reference,
            utterances: vec![
                Utterance::reference(0, SpeakerLabel::Doctor, SoapSection::Plan, "Take it daily."),
                Utterance::reference(1, SpeakerLabel::Patient, SoapSection::None, "Okay."),
            ],
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("").unwrap().is_empty());
        assert!(parse_corpus("\n\n").unwrap().is_empty());
    }

    #[test]
    fn two_utterance_round_trip() {
        let t = two_utterances();
        let mut buf = Vec::new();
        write_corpus_to(std::slice::from_ref(&t), &mut buf).unwrap();
        let back = parse_corpus(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, vec![t]);
        assert_eq!(back[0].utterances.iter().map(|u| u.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn ids_are_reindexed() {
        let line = r#"{"encounter_id":"x","kind":"reference","utterances":[{"id":5,"speaker":"doctor","section":"none","text":"a"},{"id":9,"speaker":"other","section":"plan","text":"b"}]}"#;
        let t = parse_transcript_line(line, 1).unwrap();
        assert_eq!(t.utterances[0].id, 0);
        assert_eq!(t.utterances[1].id, 1);
    }

    #[test]
    fn misspelled_section_names_the_field() {
        let line = r#"{"encounter_id":"x","kind":"reference","utterances":[{"id":0,"speaker":"doctor","section":"Plann","text":"a"}]}"#;
        let err = parse_corpus(&format!("\n{line}")).unwrap_err();
        match err {
            Error::Validation { line, field, value } => {
                assert_eq!(line, 2);
                assert_eq!(field, "section");
                assert_eq!(value, "Plann");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_corpus("{\"encounter_id\":").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn distributions_round_trip_bit_exact() {
        let soap = [0.1, 0.2, 0.3 - 1e-17, 0.15, 0.25];
        let s: f64 = soap.iter().sum();
        let soap = soap.map(|x| x / s);
        let t = Transcript {
            encounter_id: "a".into(),
            kind: TranscriptKind::Asr,
            utterances: vec![Utterance::asr(
                0,
                "hello there",
                LabelDistribution {
                    soap,
                    speaker: [0.6, 0.8, 0.0, 0.0],
                },
            )],
        };
        let back = parse_corpus(&transcript_to_line(&t)).unwrap();
        assert_eq!(back, vec![t]);
        let UtteranceLabels::Soft(d) = &back[0].utterances[0].labels else { unreachable!() };
        assert!((d.soap.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn write_to_unwritable_path_is_io_error() {
        let err = write_corpus(&[], "/nonexistent-dir/x.jsonl").unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
