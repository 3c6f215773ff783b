use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Term index, sorted lexicographically. The empty pad token is never a term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

/// Sparse term counts, sorted by term index.
pub type BowVector = Vec<(usize, f64)>;

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Out-of-vocabulary terms are ignored.
    pub fn bow<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> BowVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.get(t) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        counts.into_iter().collect()
    }
}

pub fn fit_vocab<'a, D, T>(docs: D) -> Result<Vocabulary>
where
    D: IntoIterator<Item = T>,
    T: IntoIterator<Item = &'a str>,
{
    let mut seen_doc = false;
    let mut terms = BTreeSet::new();
    for doc in docs {
        seen_doc = true;
        for t in doc {
            if !t.is_empty() {
                terms.insert(t.to_string());
            }
        }
    }
    if !seen_doc {
        return Err(Error::InvalidInput("cannot fit a vocabulary on an empty corpus".into()));
    }
    Ok(Vocabulary::from(terms.into_iter().collect::<Vec<_>>()))
}
