use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::TokenizedDoc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    corpus_frequency: Vec<u64>,
    total_docs: usize,
    min_df: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    document_frequency: Vec<usize>,
    corpus_frequency: Vec<u64>,
    total_docs: usize,
    min_df: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r.tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Vocabulary {
            tokens: r.tokens,
            index,
            document_frequency: r.document_frequency,
            corpus_frequency: r.corpus_frequency,
            total_docs: r.total_docs,
            min_df: r.min_df,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.tokens,
            document_frequency: v.document_frequency,
            corpus_frequency: v.corpus_frequency,
            total_docs: v.total_docs,
            min_df: v.min_df,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    /// Total occurrences across the corpus.
    pub fn corpus_frequency(&self, index: usize) -> u64 {
        self.corpus_frequency[index]
    }

    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }
}

pub fn build_vocabulary(docs: &[TokenizedDoc], min_df: usize) -> Result<Vocabulary> {
    build_vocabulary_excluding(docs, min_df, &HashSet::new())
}

/// Keeps tokens whose document frequency reaches `min_df` and that are not in
/// `stopwords`. Index order: descending corpus frequency, then lexicographic.
pub fn build_vocabulary_excluding(
    docs: &[TokenizedDoc],
    min_df: usize,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cf: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for t in &doc.tokens {
            *cf.entry(t).or_default() += 1;
            if seen.insert(t.as_str()) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize, u64)> = df
        .into_iter()
        .filter(|(t, d)| *d >= min_df && !stopwords.contains(*t))
        .map(|(t, d)| (t, d, cf[t]))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_df });
    }
    kept.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));

    let tokens: Vec<String> = kept.iter().map(|k| k.0.to_string()).collect();
    let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    Ok(Vocabulary {
        tokens,
        index,
        document_frequency: kept.iter().map(|k| k.1).collect(),
        corpus_frequency: kept.iter().map(|k| k.2).collect(),
        total_docs: docs.len(),
        min_df,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVector {
    pub programme_id: String,
    pub counts: BTreeMap<usize, u32>,
}

impl BowVector {
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (&i, &c) in &self.counts {
            v[i] = c as f64;
        }
        v
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are ignored.
pub fn to_bow(doc: &TokenizedDoc, vocab: &Vocabulary) -> BowVector {
    let mut counts = BTreeMap::new();
    for idx in doc.tokens.iter().filter_map(|t| vocab.index_of(t)) {
        *counts.entry(idx).or_insert(0) += 1;
    }
    BowVector {
        programme_id: doc.programme_id.clone(),
        counts,
    }
}
