//! Utterance cleanup before featurization: annotation standardization, trailing
//! dash removal, tokenization, stopword removal above the length cap, truncation
//! and padding.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::Transcript;
use crate::{Error, Result};

pub const DEFAULT_MAX_TOKENS: usize = 32;

/// English function words removed from over-long utterances.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any", "are", "aren",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
    "couldn", "d", "did", "didn", "do", "does", "doesn", "doing", "don", "down", "during", "each", "few", "for",
    "from", "further", "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself",
    "just", "ll", "m", "ma", "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor",
    "not", "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "re", "s", "same", "shan", "she", "should", "shouldn", "so", "some", "such", "t", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "ve", "very", "was", "wasn", "we", "were", "weren", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "wouldn", "y", "you",
    "your", "yours", "yourself", "yourselves",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub max_tokens: usize,
    pub stopwords: BTreeSet<String>,
    pub pad_token: String,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            max_tokens: DEFAULT_MAX_TOKENS,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            pad_token: String::new(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::InvalidInput("max_tokens must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_pad(&self, tok: &str) -> bool {
        tok == self.pad_token
    }
}

/// Replace each bracketed annotation with one upper-case word, e.g.
/// `[physician name]` becomes `PHYSICIAN_NAME`. Unbalanced brackets are kept verbatim.
pub fn standardize_annotations(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find(']');
        let nested = after.find('[');
        match close {
            Some(c) if nested.is_none_or(|n| n > c) => {
                let inner = &after[..c];
                let word = inner
                    .split(|ch: char| !ch.is_alphanumeric())
                    .filter(|w| !w.is_empty())
                    .collect::<Vec<_>>()
                    .join("_")
                    .to_uppercase();
                out.push_str(&word);
                rest = &after[c + 1..];
            }
            _ => {
                log::warn!("unbalanced bracket in {text:?}; left verbatim");
                out.push('[');
                rest = after;
            }
        }
    }
    if rest.contains(']') {
        log::warn!("unbalanced bracket in {text:?}; left verbatim");
    }
    out.push_str(rest);
    out
}

/// True when something other than bracketed annotations carries a word.
pub fn has_linguistic_content(text: &str) -> bool {
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            c if depth == 0 && c.is_alphanumeric() => return true,
            _ => {}
        }
    }
    false
}

fn is_word(tok: &str) -> bool {
    tok.chars().any(char::is_alphanumeric)
}

/// Whitespace tokens with trailing `.`, `,`, `?` and `!` split off as their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let body = raw.trim_end_matches(['.', ',', '?', '!']);
        if body.is_empty() {
            out.push(raw.to_string());
            continue;
        }
        out.push(body.to_string());
        for p in raw[body.len()..].chars() {
            out.push(p.to_string());
        }
    }
    out
}

/// Tokens padded or cut to exactly `cfg.max_tokens`.
///
/// Stopwords are removed only when the utterance is over the cap; truncation
/// keeps the leading tokens.
pub fn clean_and_tokenize(text: &str, cfg: &PreprocessConfig) -> Result<Vec<String>> {
    let trimmed = text.trim_end().trim_end_matches(|c: char| c == '-' || c == '\u{2014}' || c == '\u{2013}' || c.is_whitespace());
    let mut tokens: Vec<String> = tokenize(trimmed)
        .into_iter()
        .filter(|t| !cfg.is_pad(t))
        .collect();
    if !tokens.iter().any(|t| is_word(t)) {
        return Err(Error::InvalidInput(format!("utterance has no words: {text:?}")));
    }
    if tokens.len() > cfg.max_tokens {
        tokens.retain(|t| !cfg.stopwords.contains(&t.to_lowercase()));
    }
    tokens.truncate(cfg.max_tokens);
    tokens.resize(cfg.max_tokens, cfg.pad_token.clone());
    Ok(tokens)
}

/// Full per-utterance pipeline; `None` when the utterance should be dropped.
pub fn preprocess_text(text: &str, cfg: &PreprocessConfig) -> Option<Vec<String>> {
    if !has_linguistic_content(text) {
        return None;
    }
    clean_and_tokenize(&standardize_annotations(text), cfg).ok()
}

/// Fill `tokens` on every utterance and drop the ones without words.
/// Ids are re-densified; transcripts left empty are removed.
pub fn preprocess_corpus(transcripts: &mut Vec<Transcript>, cfg: &PreprocessConfig) {
    for t in transcripts.iter_mut() {
        t.utterances.retain_mut(|u| match preprocess_text(&u.text, cfg) {
            Some(tokens) => {
                u.tokens = tokens;
                true
            }
            None => false,
        });
        for (i, u) in t.utterances.iter_mut().enumerate() {
            u.id = i;
        }
    }
    transcripts.retain(|t| !t.utterances.is_empty());
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(tokens: &[String]) -> Vec<&str> {
        tokens.iter().filter(|t| !t.is_empty()).map(String::as_str).collect()
    }

    #[test]
    fn annotation_examples() {
        assert_eq!(standardize_annotations("[physician name] will see you"), "PHYSICIAN_NAME will see you");
        assert_eq!(standardize_annotations("no brackets here"), "no brackets here");
        assert_eq!(standardize_annotations("[lab value] was [lab value]"), "LAB_VALUE was LAB_VALUE");
        assert_eq!(standardize_annotations("open [bracket here"), "open [bracket here");
        assert_eq!(standardize_annotations("a [b [c] d"), "a [b C d");
    }

    #[test]
    fn non_linguistic_detection() {
        assert!(!has_linguistic_content("[laughter]"));
        assert!(!has_linguistic_content("[laughter] ..."));
        assert!(has_linguistic_content("[laughter] okay"));
        assert_eq!(preprocess_text("[cough]", &PreprocessConfig::default()), None);
    }

    #[test]
    fn short_utterance_is_padded() {
        let text = "one two three four five six seven eight nine ten";
        let toks = clean_and_tokenize(text, &PreprocessConfig::default()).unwrap();
        assert_eq!(toks.len(), 32);
        assert_eq!(real(&toks).len(), 10);
        assert!(toks[10..].iter().all(String::is_empty));
    }

    fn content_words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn long_utterance_with_many_stopwords() {
        // 28 content tokens + 12 stopwords = 40
        let mut words = content_words(28);
        for (k, sw) in ["the", "and", "of", "to", "a", "in", "is", "it", "you", "that", "was", "for"]
            .iter()
            .enumerate()
        {
            words.insert(k * 3, sw.to_string());
        }
        assert_eq!(words.len(), 40);
        let toks = clean_and_tokenize(&words.join(" "), &PreprocessConfig::default()).unwrap();
        assert_eq!(real(&toks).len(), 28);
        assert_eq!(toks.iter().filter(|t| t.is_empty()).count(), 4);
        assert!(real(&toks).iter().all(|t| t.starts_with('w')));
    }

    #[test]
    fn long_utterance_with_few_stopwords() {
        let mut words = content_words(38);
        words.insert(0, "the".into());
        words.insert(20, "and".into());
        let toks = clean_and_tokenize(&words.join(" "), &PreprocessConfig::default()).unwrap();
        assert_eq!(toks.len(), 32);
        assert!(toks.iter().all(|t| !t.is_empty()));
        assert_eq!(toks, content_words(32));
    }

    #[test]
    fn trailing_dashes_removed() {
        let toks = clean_and_tokenize("so I was going to --", &PreprocessConfig::default()).unwrap();
        assert_eq!(real(&toks), ["so", "I", "was", "going", "to"]);
    }

    #[test]
    fn punctuation_detached() {
        assert_eq!(tokenize("Okay, see you?"), ["Okay", ",", "see", "you", "?"]);
        assert_eq!(tokenize("e.g. fine."), ["e.g", ".", "fine", "."]);
    }

    #[test]
    fn no_words_rejected() {
        assert!(clean_and_tokenize("...", &PreprocessConfig::default()).is_err());
        assert!(clean_and_tokenize("   ", &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn stopword_list_size() {
        assert!((140..=190).contains(&DEFAULT_STOPWORDS.len()));
    }

    proptest! {
        #[test]
        fn output_length_is_max_tokens(words in proptest::collection::vec("[a-z]{1,6}", 1..80)) {
            let cfg = PreprocessConfig::default();
            let toks = clean_and_tokenize(&words.join(" "), &cfg).unwrap();
            prop_assert_eq!(toks.len(), cfg.max_tokens);
            if words.len() <= cfg.max_tokens {
                prop_assert_eq!(real(&toks).len(), words.len());
            }
        }

        #[test]
        fn preprocessing_is_idempotent(words in proptest::collection::vec("[a-z]{1,6}[.,?]?", 1..80)) {
            let cfg = PreprocessConfig::default();
            if let Ok(toks) = clean_and_tokenize(&words.join(" "), &cfg) {
                let again = clean_and_tokenize(&toks.join(" "), &cfg).unwrap();
                prop_assert_eq!(again, toks);
            }
        }
    }
}
