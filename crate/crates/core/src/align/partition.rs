use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lcs::longest_common_substring;

/// An anchor is accepted when its expected chance count falls below this.
pub const ANCHOR_THRESHOLD: f64 = 0.001;

/// Partitions deeper than this are left to the DP as leaves.
pub const MAX_DEPTH: usize = 64;

/// Unigram character frequencies used as the null model for chance matches.
#[derive(Debug, Clone, Default)]
pub struct CharModel {
    counts: HashMap<char, u64>,
    total: u64,
}

impl CharModel {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a [char]>) -> Self {
        let mut m = CharModel::default();
        for t in texts {
            for &c in t {
                *m.counts.entry(c).or_insert(0) += 1;
                m.total += 1;
            }
        }
        m
    }

    /// Uniform model over `alphabet` symbols; mostly useful in tests.
    pub fn uniform(alphabet: &[char]) -> Self {
        CharModel::from_texts([alphabet])
    }

    /// Empirical probability; unseen characters get `1 / (distinct + total)`.
    pub fn prob(&self, c: char) -> f64 {
        match self.counts.get(&c) {
            Some(&n) => n as f64 / self.total as f64,
            None => 1.0 / (self.counts.len() as f64 + self.total as f64).max(1.0),
        }
    }
}

/// Expected number of chance occurrences of `pattern` across the sliding windows
/// of two strings of the given lengths: `(n - L + 1)(m - L + 1) * prod p(c)`.
pub fn expected_substring_count(pattern: &[char], ref_len: usize, asr_len: usize, model: &CharModel) -> f64 {
    let l = pattern.len();
    assert!(l >= 1, "pattern must be non-empty");
    assert!(ref_len >= l && asr_len >= l, "pattern longer than text");
    let windows = (ref_len - l + 1) as f64 * (asr_len - l + 1) as f64;
    let log_p: f64 = pattern.iter().map(|&c| model.prob(c).ln()).sum();
    windows * log_p.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStatus {
    /// Equal-length spans that were matched exactly by a longest common substring.
    Anchored,
    /// Spans left for dynamic programming.
    Leaf,
    /// Interior node: children tile the spans in document order.
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub ref_span: Range<usize>,
    pub asr_span: Range<usize>,
    pub status: PartitionStatus,
    pub children: Vec<Partition>,
}

impl Partition {
    fn leaf(ref_span: Range<usize>, asr_span: Range<usize>) -> Self {
        Partition {
            ref_span,
            asr_span,
            status: PartitionStatus::Leaf,
            children: Vec::new(),
        }
    }

    /// Anchored and leaf nodes in document order.
    pub fn terminals(&self) -> Vec<&Partition> {
        let mut out = Vec::new();
        self.collect_terminals(&mut out);
        out
    }

    fn collect_terminals<'a>(&'a self, out: &mut Vec<&'a Partition>) {
        match self.status {
            PartitionStatus::Split => self.children.iter().for_each(|c| c.collect_terminals(out)),
            _ => out.push(self),
        }
    }

    pub fn anchors(&self) -> Vec<(Range<usize>, Range<usize>)> {
        self.terminals()
            .into_iter()
            .filter(|p| p.status == PartitionStatus::Anchored)
            .map(|p| (p.ref_span.clone(), p.asr_span.clone()))
            .collect()
    }

    pub fn leaves(&self) -> Vec<(Range<usize>, Range<usize>)> {
        self.terminals()
            .into_iter()
            .filter(|p| p.status == PartitionStatus::Leaf)
            .map(|p| (p.ref_span.clone(), p.asr_span.clone()))
            .collect()
    }
}

/// Recursively anchor significant longest common substrings.
///
/// The null model is estimated once from both full texts; window counts use the
/// lengths of the partition being split.
pub fn partition_chars(reference: &[char], asr: &[char]) -> Partition {
    let model = CharModel::from_texts([reference, asr]);
    build(reference, asr, 0..reference.len(), 0..asr.len(), &model, 0)
}

fn build(
    reference: &[char],
    asr: &[char],
    r: Range<usize>,
    a: Range<usize>,
    model: &CharModel,
    depth: usize,
) -> Partition {
    if depth >= MAX_DEPTH || r.is_empty() || a.is_empty() {
        return Partition::leaf(r, a);
    }
    let rs = &reference[r.clone()];
    let as_ = &asr[a.clone()];
    let (ri, ai, len) = longest_common_substring(rs, as_);
    if len == 0 {
        return Partition::leaf(r, a);
    }
    let expected = expected_substring_count(&rs[ri..ri + len], rs.len(), as_.len(), model);
    if expected >= ANCHOR_THRESHOLD {
        return Partition::leaf(r, a);
    }

    let anchor = Partition {
        ref_span: r.start + ri..r.start + ri + len,
        asr_span: a.start + ai..a.start + ai + len,
        status: PartitionStatus::Anchored,
        children: Vec::new(),
    };
    let left = (r.start..anchor.ref_span.start, a.start..anchor.asr_span.start);
    let right = (anchor.ref_span.end..r.end, anchor.asr_span.end..a.end);

    let mut children = Vec::with_capacity(3);
    if !(left.0.is_empty() && left.1.is_empty()) {
        children.push(build(reference, asr, left.0, left.1, model, depth + 1));
    }
    let right_nonempty = !(right.0.is_empty() && right.1.is_empty());
    if children.is_empty() && !right_nonempty {
        return anchor;
    }
    children.push(anchor);
    if right_nonempty {
        children.push(build(reference, asr, right.0, right.1, model, depth + 1));
    }
    Partition {
        ref_span: r,
        asr_span: a,
        status: PartitionStatus::Split,
        children,
    }
}
