//! Character-level alignment of a reference transcript against ASR output.
//!
//! Long exact matches that are unlikely under a unigram null model are anchored
//! first; only the unresolved gaps between anchors go through the quadratic DP.

mod dp;
mod lcs;
mod partition;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use dp::{dp_align, dp_align_chars};
pub use lcs::{longest_common_substring, longest_common_substring_str, SuffixAutomaton};
pub use partition::{
    expected_substring_count, partition_chars, CharModel, Partition, PartitionStatus, ANCHOR_THRESHOLD, MAX_DEPTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignOp {
    Match,
    Substitute,
    /// Character present only in the ASR text.
    Insert,
    /// Character present only in the reference text.
    Delete,
}

impl AlignOp {
    pub fn code(self) -> char {
        match self {
            AlignOp::Match => 'M',
            AlignOp::Substitute => 'S',
            AlignOp::Insert => 'I',
            AlignOp::Delete => 'D',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'M' => Some(AlignOp::Match),
            'S' => Some(AlignOp::Substitute),
            'I' => Some(AlignOp::Insert),
            'D' => Some(AlignOp::Delete),
            _ => None,
        }
    }

    fn consumes_ref(self) -> bool {
        !matches!(self, AlignOp::Insert)
    }

    fn consumes_asr(self) -> bool {
        !matches!(self, AlignOp::Delete)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharAlignment {
    pub ops: Vec<AlignOp>,
    pub ref_len: usize,
    pub asr_len: usize,
}

/// One step of an alignment with the char positions it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedPair {
    pub op: AlignOp,
    pub ref_pos: Option<usize>,
    pub asr_pos: Option<usize>,
}

impl CharAlignment {
    /// Unit edit cost: every non-match op counts 1.
    pub fn cost(&self) -> usize {
        self.ops.iter().filter(|o| **o != AlignOp::Match).count()
    }

    pub fn op_string(&self) -> String {
        self.ops.iter().map(|o| o.code()).collect()
    }

    pub fn count(&self, op: AlignOp) -> usize {
        self.ops.iter().filter(|o| **o == op).count()
    }

    pub fn check_lengths(&self) -> crate::Result<()> {
        let ref_used = self.ops.iter().filter(|o| o.consumes_ref()).count();
        let asr_used = self.ops.iter().filter(|o| o.consumes_asr()).count();
        if ref_used != self.ref_len || asr_used != self.asr_len {
            return Err(crate::Error::Invariant(format!(
                "alignment consumes {ref_used}/{asr_used} chars but lengths are {}/{}",
                self.ref_len, self.asr_len
            )));
        }
        Ok(())
    }

    pub fn pairs(&self) -> impl Iterator<Item = AlignedPair> + '_ {
        let mut r = 0;
        let mut a = 0;
        self.ops.iter().map(move |&op| {
            let ref_pos = op.consumes_ref().then(|| {
                r += 1;
                r - 1
            });
            let asr_pos = op.consumes_asr().then(|| {
                a += 1;
                a - 1
            });
            AlignedPair { op, ref_pos, asr_pos }
        })
    }

    fn extend(&mut self, other: CharAlignment) {
        self.ops.extend(other.ops);
        self.ref_len += other.ref_len;
        self.asr_len += other.asr_len;
    }
}

/// Lowercase per character, keeping a one-to-one mapping to the original offsets.
pub fn fold_case(s: &str) -> Vec<char> {
    s.chars()
        .map(|c| {
            let mut lower = c.to_lowercase();
            match (lower.next(), lower.next()) {
                (Some(l), None) => l,
                _ => c,
            }
        })
        .collect()
}

pub fn partition_tree(reference: &str, asr: &str) -> Partition {
    partition_chars(&fold_case(reference), &fold_case(asr))
}

/// Anchor-then-DP alignment on case-folded text.
pub fn align_transcripts(reference: &str, asr: &str) -> CharAlignment {
    align_with_tree(reference, asr).0
}

pub fn align_with_tree(reference: &str, asr: &str) -> (CharAlignment, Partition) {
    let r = fold_case(reference);
    let a = fold_case(asr);
    let tree = partition_chars(&r, &a);
    let mut out = CharAlignment::default();
    for node in tree.terminals() {
        match node.status {
            PartitionStatus::Anchored => out.extend(CharAlignment {
                ops: vec![AlignOp::Match; node.ref_span.len()],
                ref_len: node.ref_span.len(),
                asr_len: node.asr_span.len(),
            }),
            PartitionStatus::Leaf => {
                out.extend(dp_align_chars(&r[node.ref_span.clone()], &a[node.asr_span.clone()]))
            }
            PartitionStatus::Split => unreachable!("terminals never yields split nodes"),
        }
    }
    (out, tree)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPair {
    pub reference: [usize; 2],
    pub asr: [usize; 2],
}

impl SpanPair {
    fn new(r: &Range<usize>, a: &Range<usize>) -> Self {
        SpanPair {
            reference: [r.start, r.end],
            asr: [a.start, a.end],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafAlignment {
    #[serde(flatten)]
    pub spans: SpanPair,
    /// One of `M`, `S`, `I`, `D` per aligned position.
    pub ops: String,
}

/// Per-encounter alignment dump record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentDump {
    pub encounter_id: String,
    pub ref_len: usize,
    pub asr_len: usize,
    pub cost: usize,
    pub anchors: Vec<SpanPair>,
    pub leaves: Vec<LeafAlignment>,
}

impl AlignmentDump {
    pub fn build(encounter_id: &str, reference: &str, asr: &str) -> Self {
        let r = fold_case(reference);
        let a = fold_case(asr);
        let tree = partition_chars(&r, &a);
        let mut cost = 0;
        let mut anchors = Vec::new();
        let mut leaves = Vec::new();
        for node in tree.terminals() {
            match node.status {
                PartitionStatus::Anchored => anchors.push(SpanPair::new(&node.ref_span, &node.asr_span)),
                PartitionStatus::Leaf => {
                    let al = dp_align_chars(&r[node.ref_span.clone()], &a[node.asr_span.clone()]);
                    cost += al.cost();
                    leaves.push(LeafAlignment {
                        spans: SpanPair::new(&node.ref_span, &node.asr_span),
                        ops: al.op_string(),
                    });
                }
                PartitionStatus::Split => unreachable!(),
            }
        }
        AlignmentDump {
            encounter_id: encounter_id.to_string(),
            ref_len: r.len(),
            asr_len: a.len(),
            cost,
            anchors,
            leaves,
        }
    }
}
