//! Bag-of-words featurization: tokenize title+abstract, keep the `max_terms`
//! terms with the highest corpus-level tf-idf score, and emit L2-normalized
//! tf-idf rows.
//!
//! The corpus-level score of a term is `Σ_d tf(t,d) · idf(t)` with
//! `idf(t) = ln(|D| / df(t)) + 1` (no smoothing).

mod tokenize;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Study};

pub use tokenize::{tokenize, tokenize_text, Stoplist, STOPLIST_VERSION};

pub const DEFAULT_MAX_TERMS: usize = 4000;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus produced no tokens; vocabulary would be empty")]
    EmptyVocabulary,
    #[error("max_terms must be at least 1")]
    ZeroMaxTerms,
}

/// The selected terms, in lexicographic order. A term's position is its
/// feature index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub df: Vec<usize>,
    pub idf: Vec<f64>,
    /// Corpus-level tf-idf score used for selection.
    pub score: Vec<f64>,
    pub n_docs: usize,
    /// Number of distinct terms seen before truncation.
    pub distinct_terms: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut out = SparseVec::default();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(i as u32);
                out.values.push(v);
            }
        }
        out
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseVec>,
    pub dim: usize,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<SparseVec>, dim: usize) -> Self {
        FeatureMatrix { rows, dim }
    }

    /// Builds a matrix from dense rows; used mainly by tests and the C ABI.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        FeatureMatrix {
            rows: rows.iter().map(|r| SparseVec::from_dense(r)).collect(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &SparseVec {
        &self.rows[i]
    }
}

#[derive(Debug, Clone)]
pub struct TfidfVectorizer {
    pub max_terms: usize,
    pub stoplist: Stoplist,
}

impl Default for TfidfVectorizer {
    fn default() -> Self {
        TfidfVectorizer {
            max_terms: DEFAULT_MAX_TERMS,
            stoplist: Stoplist::english(),
        }
    }
}

impl TfidfVectorizer {
    pub fn new(max_terms: usize, stoplist: Stoplist) -> Self {
        TfidfVectorizer { max_terms, stoplist }
    }

    fn term_counts(&self, study: &Study) -> HashMap<String, usize> {
        let mut counts = HashMap::new();
        for tok in tokenize(study, &self.stoplist) {
            *counts.entry(tok).or_insert(0) += 1;
        }
        counts
    }

    pub fn fit(&self, corpus: &Corpus) -> Result<Vocabulary, FeatureError> {
        if self.max_terms == 0 {
            return Err(FeatureError::ZeroMaxTerms);
        }
        if corpus.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let per_doc: Vec<HashMap<String, usize>> = corpus
            .studies
            .par_iter()
            .map(|s| self.term_counts(s))
            .collect();

        // term -> (total tf, df)
        let mut totals: HashMap<&str, (usize, usize)> = HashMap::new();
        for counts in &per_doc {
            for (term, &tf) in counts {
                let e = totals.entry(term.as_str()).or_insert((0, 0));
                e.0 += tf;
                e.1 += 1;
            }
        }
        if totals.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }

        let n_docs = corpus.len();
        let mut scored: Vec<(&str, usize, f64, f64)> = totals
            .into_iter()
            .map(|(term, (tf, df))| {
                let idf = idf(n_docs, df);
                (term, df, idf, tf as f64 * idf)
            })
            .collect();
        let distinct_terms = scored.len();

        scored.sort_by(|a, b| b.3.total_cmp(&a.3).then_with(|| a.0.cmp(b.0)));
        scored.truncate(self.max_terms);
        scored.sort_by(|a, b| a.0.cmp(b.0));

        let mut vocab = Vocabulary {
            terms: scored.iter().map(|s| s.0.to_string()).collect(),
            df: scored.iter().map(|s| s.1).collect(),
            idf: scored.iter().map(|s| s.2).collect(),
            score: scored.iter().map(|s| s.3).collect(),
            n_docs,
            distinct_terms,
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        Ok(vocab)
    }

    /// One L2-normalized tf-idf row per study, in corpus order. Studies with
    /// no selected term yield an empty row.
    pub fn transform(&self, corpus: &Corpus, vocab: &Vocabulary) -> FeatureMatrix {
        let rows = corpus
            .studies
            .par_iter()
            .map(|s| {
                let mut entries: Vec<(u32, f64)> = self
                    .term_counts(s)
                    .into_iter()
                    .filter_map(|(term, tf)| {
                        vocab
                            .index_of(&term)
                            .map(|ix| (ix as u32, tf as f64 * vocab.idf[ix]))
                    })
                    .collect();
                entries.sort_by_key(|e| e.0);
                let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                let mut row = SparseVec::default();
                if norm > 0.0 {
                    for (i, v) in entries {
                        row.indices.push(i);
                        row.values.push(v / norm);
                    }
                }
                row
            })
            .collect();
        FeatureMatrix {
            rows,
            dim: vocab.len(),
        }
    }

    pub fn fit_transform(&self, corpus: &Corpus) -> Result<(Vocabulary, FeatureMatrix), FeatureError> {
        let vocab = self.fit(corpus)?;
        let matrix = self.transform(corpus, &vocab);
        Ok((vocab, matrix))
    }
}

fn idf(n_docs: usize, df: usize) -> f64 {
    (n_docs as f64 / df as f64).ln() + 1.0
}
