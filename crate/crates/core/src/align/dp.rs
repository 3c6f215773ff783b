use super::{AlignOp, CharAlignment};

/// Unit-cost edit alignment with full traceback.
///
/// Ties during traceback prefer Match, then Substitute, then Delete, then Insert.
pub fn dp_align_chars(a: &[char], b: &[char]) -> CharAlignment {
    let n = a.len();
    let m = b.len();
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        d[j] = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + u32::from(a[i - 1] != b[j - 1]);
            let up = d[(i - 1) * w + j] + 1;
            let left = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * w + j - 1];
            if a[i - 1] == b[j - 1] && here == diag {
                ops.push(AlignOp::Match);
                i -= 1;
                j -= 1;
                continue;
            }
            if a[i - 1] != b[j - 1] && here == diag + 1 {
                ops.push(AlignOp::Substitute);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            ops.push(AlignOp::Delete);
            i -= 1;
        } else {
            ops.push(AlignOp::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    CharAlignment {
        ops,
        ref_len: n,
        asr_len: m,
    }
}

/// Align two strings as given (no case folding).
pub fn dp_align(a: &str, b: &str) -> CharAlignment {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    dp_align_chars(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    /// Exponential recursive edit distance; only for tiny inputs.
    fn recursive_distance(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = recursive_distance(ra, rb) + usize::from(x != y);
                let del = recursive_distance(ra, b) + 1;
                let ins = recursive_distance(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    /// Textbook two-row DP, written independently of the traceback version.
    fn textbook_distance(a: &[char], b: &[char]) -> usize {
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        for (i, ca) in a.iter().enumerate() {
            let mut cur = vec![i + 1; b.len() + 1];
            for (j, cb) in b.iter().enumerate() {
                let cost = if ca == cb { 0 } else { 1 };
                cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
            }
            prev = cur;
        }
        prev[b.len()]
    }

    #[test]
    fn kitten_sitting() {
        let al = dp_align("kitten", "sitting");
        assert_eq!(al.cost(), 3);
        let a: Vec<char> = "kitten".chars().collect();
        let b: Vec<char> = "sitting".chars().collect();
        assert_eq!(recursive_distance(&a, &b), 3);
    }

    #[test]
    fn identical_is_all_match() {
        let al = dp_align("same text", "same text");
        assert!(al.ops.iter().all(|o| *o == AlignOp::Match));
        assert_eq!(al.cost(), 0);
    }

    #[test]
    fn empty_sides() {
        assert_eq!(dp_align("", "abc").op_string(), "III");
        assert_eq!(dp_align("ab", "").op_string(), "DD");
        assert_eq!(dp_align("", "").ops.len(), 0);
    }

    #[test]
    fn tie_break_prefers_substitute_then_delete() {
        // "ab" -> "b": delete 'a' then match 'b'
        assert_eq!(dp_align("ab", "b").op_string(), "DM");
        assert_eq!(dp_align("a", "b").op_string(), "S");
    }

    #[test]
    fn random_pairs_match_textbook_oracle() {
        let alphabet = ['a', 'b', 'c', 'd', ' '];
        let mut rng = Rng::new(17);
        for _ in 0..500 {
            let a: Vec<char> = (0..rng.below(41)).map(|_| *rng.choose(&alphabet)).collect();
            let b: Vec<char> = (0..rng.below(41)).map(|_| *rng.choose(&alphabet)).collect();
            let al = dp_align_chars(&a, &b);
            al.check_lengths().unwrap();
            assert_eq!(al.cost(), textbook_distance(&a, &b));
            assert_eq!(al.cost(), dp_align_chars(&b, &a).cost());
        }
    }

    #[test]
    fn small_pairs_match_recursive_oracle() {
        let alphabet = ['x', 'y', 'z'];
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let a: Vec<char> = (0..rng.below(7)).map(|_| *rng.choose(&alphabet)).collect();
            let b: Vec<char> = (0..rng.below(7)).map(|_| *rng.choose(&alphabet)).collect();
            assert_eq!(dp_align_chars(&a, &b).cost(), recursive_distance(&a, &b));
        }
    }
}
