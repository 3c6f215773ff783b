//! Longest common substring via a suffix automaton built over the reference side.

#[derive(Debug, Clone)]
struct State {
    len: usize,
    link: Option<usize>,
    next: Vec<(char, usize)>,
    /// End index (inclusive) of the first occurrence of this state's strings.
    first_end: usize,
}

impl State {
    fn go(&self, c: char) -> Option<usize> {
        self.next.iter().find(|(k, _)| *k == c).map(|&(_, v)| v)
    }

    fn set(&mut self, c: char, to: usize) {
        match self.next.iter_mut().find(|(k, _)| *k == c) {
            Some(slot) => slot.1 = to,
            None => self.next.push((c, to)),
        }
    }
}

/// Suffix automaton of a char sequence. Built in O(n) states and transitions.
#[derive(Debug, Clone)]
pub struct SuffixAutomaton {
    states: Vec<State>,
}

impl SuffixAutomaton {
    pub fn new(text: &[char]) -> Self {
        let mut states = Vec::with_capacity(2 * text.len().max(1));
        states.push(State {
            len: 0,
            link: None,
            next: Vec::new(),
            first_end: 0,
        });
        let mut last = 0;
        for (i, &c) in text.iter().enumerate() {
            let cur = states.len();
            states.push(State {
                len: states[last].len + 1,
                link: None,
                next: Vec::new(),
                first_end: i,
            });
            let mut p = Some(last);
            while let Some(pi) = p {
                if states[pi].go(c).is_some() {
                    break;
                }
                states[pi].set(c, cur);
                p = states[pi].link;
            }
            match p {
                None => states[cur].link = Some(0),
                Some(pi) => {
                    let q = states[pi].go(c).unwrap();
                    if states[pi].len + 1 == states[q].len {
                        states[cur].link = Some(q);
                    } else {
                        let clone = states.len();
                        let mut cloned = states[q].clone();
                        cloned.len = states[pi].len + 1;
                        states.push(cloned);
                        let mut p2 = Some(pi);
                        while let Some(pj) = p2 {
                            if states[pj].go(c) != Some(q) {
                                break;
                            }
                            states[pj].set(c, clone);
                            p2 = states[pj].link;
                        }
                        states[q].link = Some(clone);
                        states[cur].link = Some(clone);
                    }
                }
            }
            last = cur;
        }
        SuffixAutomaton { states }
    }

    fn link_len(&self, s: usize) -> usize {
        self.states[s].link.map_or(0, |l| self.states[l].len)
    }

    /// Longest substring of `other` that also occurs in the indexed text.
    ///
    /// Returns `(text_start, other_start, length)`. Among equally long matches the
    /// leftmost text start wins, then the leftmost start in `other`.
    pub fn longest_common(&self, other: &[char]) -> (usize, usize, usize) {
        let mut best = (0usize, 0usize, 0usize);
        let mut v = 0usize;
        let mut l = 0usize;
        for (j, &c) in other.iter().enumerate() {
            while v != 0 && self.states[v].go(c).is_none() {
                v = self.states[v].link.unwrap_or(0);
                l = self.states[v].len;
            }
            match self.states[v].go(c) {
                Some(u) => {
                    v = u;
                    l += 1;
                }
                None => {
                    v = 0;
                    l = 0;
                }
            }
            if l == 0 || l < best.2 {
                continue;
            }
            // the matched string may live in a suffix-link ancestor of v
            let mut s = v;
            while self.link_len(s) >= l {
                s = self.states[s].link.unwrap();
            }
            let a_start = self.states[s].first_end + 1 - l;
            let b_start = j + 1 - l;
            if l > best.2 || (a_start, b_start) < (best.0, best.1) {
                best = (a_start, b_start, l);
            }
        }
        best
    }
}

/// Longest common substring of `a` and `b` as `(a_start, b_start, length)`.
///
/// Length is 0 iff the strings share no character; the starts are then 0.
pub fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    if a.is_empty() || b.is_empty() {
        return (0, 0, 0);
    }
    SuffixAutomaton::new(a).longest_common(b)
}

/// Convenience wrapper over `&str`; offsets are in chars.
pub fn longest_common_substring_str(a: &str, b: &str) -> (usize, usize, usize) {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    longest_common_substring(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    /// O(n^4) enumeration with the same tie rule.
    fn brute_force(a: &[char], b: &[char]) -> (usize, usize, usize) {
        let mut best = (0, 0, 0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                for len in 1..=(a.len() - i).min(b.len() - j) {
                    if a[i..i + len] == b[j..j + len] && len > best.2 {
                        best = (i, j, len);
                    }
                }
            }
        }
        best
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn identical_strings() {
        assert_eq!(longest_common_substring_str("abc", "abc"), (0, 0, 3));
    }

    #[test]
    fn empty_input() {
        assert_eq!(longest_common_substring_str("", "xyz").2, 0);
        assert_eq!(longest_common_substring_str("xyz", "").2, 0);
    }

    #[test]
    fn no_common_char() {
        assert_eq!(longest_common_substring_str("abc", "xyz").2, 0);
    }

    #[test]
    fn tie_prefers_leftmost_reference_then_asr() {
        // "ab" and "cd" both length 2; "ab" starts first in a.
        assert_eq!(longest_common_substring_str("ab_cd", "cd_ab"), (0, 3, 2));
        // same string occurring twice in b
        assert_eq!(longest_common_substring_str("xab", "ab ab"), (1, 0, 2));
    }

    #[test]
    fn matches_brute_force_on_random_pairs() {
        let alphabet = ['a', 'b', 'c', ' '];
        let mut rng = Rng::new(2024);
        for _ in 0..200 {
            let la = rng.below(31);
            let lb = rng.below(31);
            let a: Vec<char> = (0..la).map(|_| *rng.choose(&alphabet)).collect();
            let b: Vec<char> = (0..lb).map(|_| *rng.choose(&alphabet)).collect();
            assert_eq!(
                longest_common_substring(&a, &b),
                brute_force(&a, &b),
                "a={:?} b={:?}",
                a.iter().collect::<String>(),
                b.iter().collect::<String>()
            );
        }
    }

    #[test]
    fn repeated_text_automaton() {
        let a = chars("abababab");
        let b = chars("babab");
        assert_eq!(longest_common_substring(&a, &b), brute_force(&a, &b));
    }
}
