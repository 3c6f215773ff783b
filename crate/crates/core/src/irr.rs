//! Agreement between two SOAP notes written for the same conversation.
//!
//! Each source observation is mapped to the reference observation in the same
//! subsection with the highest overlap (Jaccard over evidence plus Jaccard over
//! tags, ties to the lower index). Mapped observations are identical or
//! substitutions, unmapped ones insertions. A reference observation that
//! overlaps no source observation in its subsection is a deletion, so swapping
//! the roles of the two notes swaps insertions and deletions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::SoapSection;
use crate::{Error, Result};

/// Subsections accepted in notes, as `section.subsection`.
pub const SUBSECTIONS: &[&str] = &[
    "subjective.chief_complaint",
    "subjective.hpi",
    "subjective.review_of_systems",
    "subjective.medications",
    "subjective.allergies",
    "subjective.history",
    "objective.vitals",
    "objective.exam",
    "objective.labs",
    "objective.imaging",
    "assessment.diagnosis",
    "assessment.differential",
    "plan.medications",
    "plan.tests",
    "plan.referrals",
    "plan.followup",
    "plan.education",
];

/// The four content sections, in index order.
pub const NOTE_SECTIONS: [SoapSection; 4] =
    [SoapSection::Subjective, SoapSection::Objective, SoapSection::Assessment, SoapSection::Plan];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub subsection: String,
    pub summary: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    pub evidence: BTreeSet<usize>,
}

impl Observation {
    pub fn section(&self) -> Option<SoapSection> {
        let head = self.subsection.split('.').next()?;
        NOTE_SECTIONS.into_iter().find(|s| s.as_str() == head)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapNote {
    pub encounter_id: String,
    pub observations: Vec<Observation>,
}

impl SoapNote {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for (i, o) in self.observations.iter().enumerate() {
            let bad = |field: &str, value: String| Error::Invariant(format!(
                "note {} observation {i}: {field} {value:?}",
                self.encounter_id
            ));
            if !SUBSECTIONS.contains(&o.subsection.as_str()) {
                return Err(bad("unknown subsection", o.subsection.clone()));
            }
            if o.evidence.is_empty() {
                return Err(bad("empty evidence", String::new()));
            }
            if let Some(id) = &o.id {
                if !ids.insert(id.as_str()) {
                    return Err(bad("duplicate id", id.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn read_notes(path: impl AsRef<Path>) -> Result<Vec<SoapNote>> {
    let notes: Vec<SoapNote> = crate::corpus::read_jsonl(path.as_ref())?;
    for n in &notes {
        n.validate()?;
    }
    Ok(notes)
}

pub fn write_notes(notes: &[SoapNote], path: impl AsRef<Path>) -> Result<()> {
    crate::corpus::write_jsonl(notes, path.as_ref())
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Overlap score between two observations; zero across subsections.
pub fn overlap_score(a: &Observation, b: &Observation) -> f64 {
    if a.subsection != b.subsection {
        return 0.0;
    }
    jaccard(&a.evidence, &b.evidence) + jaccard(&a.tags, &b.tags)
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_identical(a: &Observation, b: &Observation) -> bool {
    a.subsection == b.subsection
        && a.tags == b.tags
        && a.evidence == b.evidence
        && normalize_ws(&a.summary) == normalize_ws(&b.summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Identical,
    Substitution,
    Insertion,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMapping {
    pub category: Category,
    /// Reference observation index for identical and substitution.
    pub matched: Option<usize>,
    pub evidence_overlap: f64,
    pub tag_overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteMapping {
    pub source: Vec<SourceMapping>,
    /// Reference observation indices counted as deletions.
    pub deletions: Vec<usize>,
    pub n_reference: usize,
}

impl NoteMapping {
    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::Deletion => self.deletions.len(),
            _ => self.source.iter().filter(|m| m.category == c).count(),
        }
    }
}

pub fn map_notes(source: &SoapNote, reference: &SoapNote) -> Result<NoteMapping> {
    if source.encounter_id != reference.encounter_id {
        return Err(Error::InvalidInput(format!(
            "notes belong to different encounters: {} vs {}",
            source.encounter_id, reference.encounter_id
        )));
    }
    let mapped = source
        .observations
        .iter()
        .map(|s| {
            let mut best: Option<(usize, f64)> = None;
            for (j, r) in reference.observations.iter().enumerate() {
                let score = overlap_score(s, r);
                if score > 0.0 && best.is_none_or(|(_, b)| score > b) {
                    best = Some((j, score));
                }
            }
            match best {
                None => SourceMapping {
                    category: Category::Insertion,
                    matched: None,
                    evidence_overlap: 0.0,
                    tag_overlap: 0.0,
                },
                Some((j, _)) => {
                    let r = &reference.observations[j];
                    SourceMapping {
                        category: if is_identical(s, r) {
                            Category::Identical
                        } else {
                            Category::Substitution
                        },
                        matched: Some(j),
                        evidence_overlap: jaccard(&s.evidence, &r.evidence),
                        tag_overlap: jaccard(&s.tags, &r.tags),
                    }
                }
            }
        })
        .collect();
    let deletions = reference
        .observations
        .iter()
        .enumerate()
        .filter(|(_, r)| source.observations.iter().all(|s| overlap_score(s, r) == 0.0))
        .map(|(j, _)| j)
        .collect();
    Ok(NoteMapping {
        source: mapped,
        deletions,
        n_reference: reference.observations.len(),
    })
}

/// Mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub var: f64,
    pub n: usize,
}

impl MeanVar {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanVar {
                mean: f64::NAN,
                var: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        MeanVar { mean, var, n }
    }
}

/// Note-level mapping statistics across pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingStats {
    /// Fractions of source observations.
    pub identical: MeanVar,
    pub insertions: MeanVar,
    pub substitutions: MeanVar,
    /// Fraction of reference observations.
    pub deletions: MeanVar,
    /// Per-pair mean over substitutions; pairs without substitutions are skipped.
    pub evidence_overlap: MeanVar,
    pub tag_overlap: MeanVar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionAgreement {
    pub section: SoapSection,
    pub accuracy: f64,
    pub f1: f64,
    /// Share of utterances annotator 2 cites for this section.
    pub prevalence: f64,
    /// `None` when the conditioning event never occurs.
    pub p_pos_given_pos: Option<f64>,
    pub p_pos_given_neg: Option<f64>,
    /// Counts indexed `[y1][y2]`.
    pub table: [[usize; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrReport {
    pub n_pairs: usize,
    pub mapping: MappingStats,
    pub sections: Vec<SectionAgreement>,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Which utterances a note cites for each content section.
fn cited(note: &SoapNote, n_utterances: usize) -> Result<Vec<Vec<bool>>> {
    let mut y = vec![vec![false; n_utterances]; NOTE_SECTIONS.len()];
    for o in &note.observations {
        let section = o
            .section()
            .ok_or_else(|| Error::Invariant(format!("subsection {:?} has no section", o.subsection)))?;
        let k = section.index() - 1;
        for &u in &o.evidence {
            if u >= n_utterances {
                return Err(Error::Invariant(format!(
                    "{}: evidence utterance {u} out of range ({n_utterances} utterances)",
                    note.encounter_id
                )));
            }
            y[k][u] = true;
        }
    }
    Ok(y)
}

/// Aggregate agreement over note pairs `(annotator 1, annotator 2)`.
/// Annotator 2 plays the reference role and is treated as gold.
pub fn irr_report(pairs: &[(SoapNote, SoapNote)], utterance_counts: &HashMap<String, usize>) -> Result<IrrReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no note pairs".into()));
    }
    let mut fr: [Vec<f64>; 4] = Default::default();
    let mut ev = Vec::new();
    let mut tg = Vec::new();
    let mut tables = [[[0usize; 2]; 2]; 4];
    for (a, b) in pairs {
        let m = map_notes(a, b)?;
        let ns = m.source.len();
        fr[0].push(ratio(m.count(Category::Identical), ns));
        fr[1].push(ratio(m.count(Category::Insertion), ns));
        fr[2].push(ratio(m.count(Category::Substitution), ns));
        fr[3].push(ratio(m.count(Category::Deletion), m.n_reference));
        let subs: Vec<&SourceMapping> = m.source.iter().filter(|s| s.category == Category::Substitution).collect();
        if !subs.is_empty() {
            ev.push(subs.iter().map(|s| s.evidence_overlap).sum::<f64>() / subs.len() as f64);
            tg.push(subs.iter().map(|s| s.tag_overlap).sum::<f64>() / subs.len() as f64);
        }
        let n = *utterance_counts
            .get(&a.encounter_id)
            .ok_or_else(|| Error::InvalidInput(format!("no transcript for encounter {}", a.encounter_id)))?;
        let (y1, y2) = (cited(a, n)?, cited(b, n)?);
        for k in 0..NOTE_SECTIONS.len() {
            for u in 0..n {
                tables[k][usize::from(y1[k][u])][usize::from(y2[k][u])] += 1;
            }
        }
    }
    let sections: Vec<SectionAgreement> = NOTE_SECTIONS
        .iter()
        .zip(tables)
        .map(|(&section, t)| {
            let total = t[0][0] + t[0][1] + t[1][0] + t[1][1];
            let (tp, fp, fn_) = (t[1][1], t[1][0], t[0][1]);
            SectionAgreement {
                section,
                accuracy: ratio(t[0][0] + t[1][1], total),
                // neither annotator cites the section: agreement is perfect
                f1: if tp + fp + fn_ == 0 { 1.0 } else { ratio(2 * tp, 2 * tp + fp + fn_) },
                prevalence: ratio(t[0][1] + t[1][1], total),
                p_pos_given_pos: (t[0][1] + t[1][1] > 0).then(|| ratio(t[1][1], t[0][1] + t[1][1])),
                p_pos_given_neg: (t[0][0] + t[1][0] > 0).then(|| ratio(t[1][0], t[0][0] + t[1][0])),
                table: t,
            }
        })
        .collect();
    let macro_f1 = sections.iter().map(|s| s.f1).sum::<f64>() / sections.len() as f64;
    let accuracy = sections.iter().map(|s| s.accuracy).sum::<f64>() / sections.len() as f64;
    let [identical, insertions, substitutions, deletions] = fr.map(|v| MeanVar::of(&v));
    Ok(IrrReport {
        n_pairs: pairs.len(),
        mapping: MappingStats {
            identical,
            insertions,
            substitutions,
            deletions,
            evidence_overlap: MeanVar::of(&ev),
            tag_overlap: MeanVar::of(&tg),
        },
        sections,
        macro_f1,
        accuracy,
    })
}

/// Pair notes from two annotators by encounter id, in the order of `first`.
pub fn pair_notes(first: Vec<SoapNote>, second: Vec<SoapNote>) -> Result<Vec<(SoapNote, SoapNote)>> {
    let mut by_id: HashMap<String, SoapNote> = second.into_iter().map(|n| (n.encounter_id.clone(), n)).collect();
    first
        .into_iter()
        .map(|a| {
            let b = by_id
                .remove(&a.encounter_id)
                .ok_or_else(|| Error::InvalidInput(format!("encounter {} has only one note", a.encounter_id)))?;
            Ok((a, b))
        })
        .collect()
}

impl IrrReport {
    pub fn render(&self) -> String {
        let m = &self.mapping;
        let mut out = String::new();
        let _ = writeln!(out, "Note mapping over {} pairs (mean / variance)", self.n_pairs);
        let _ = writeln!(out, "Identical | Deletions | Insertions | Substitutions | Evidence overlap | Tag overlap");
        let cell = |v: &MeanVar| {
            if v.n == 0 {
                "-".to_string()
            } else {
                format!("{:.3} / {:.3}", v.mean, v.var)
            }
        };
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {} | {}",
            cell(&m.identical),
            cell(&m.deletions),
            cell(&m.insertions),
            cell(&m.substitutions),
            cell(&m.evidence_overlap),
            cell(&m.tag_overlap)
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Utterance agreement (annotator 2 as gold)");
        let _ = writeln!(out, "Section | Accuracy | F1 | Prevalence | P(Y1=1|Y2=1) | P(Y1=1|Y2=0)");
        let opt = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{p:.3}"));
        for s in &self.sections {
            let _ = writeln!(
                out,
                "{} | {:.3} | {:.3} | {:.3} | {} | {}",
                s.section.as_str(),
                s.accuracy,
                s.f1,
                s.prevalence,
                opt(s.p_pos_given_pos),
                opt(s.p_pos_given_neg)
            );
        }
        let _ = writeln!(out, "macro | {:.3} | {:.3} | | |", self.accuracy, self.macro_f1);
        out
    }
}
