//! Inverted index and BM25 ranking.
//!
//! Scores use the saturated, length-normalized term-frequency form with the
//! "+1"-inside-the-log IDF, so every per-term contribution is positive:
//!
//! ```text
//! IDF(t)      = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
//! TF(t, D)    = (k1 + 1) f / (k1 (1 - b + b |D| / avgDL) + f)
//! BM25(D, Q)  = sum over query tokens of IDF(t) * TF(t, D)
//! ```

mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{load_index, save_index, INDEX_FORMAT, INDEX_VERSION};

use crate::corpus::{tokenize, DocId, Document, Query, TokenStream};
use crate::rank::RankedList;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("invalid BM25 parameters: k1 = {k1}, b = {b} (need k1 >= 0 and 0 <= b <= 1)")]
    InvalidParams { k1: f64, b: f64 },
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(DocId),
    #[error("unknown document id {0:?}")]
    UnknownDoc(DocId),
    #[error("k must be >= 1")]
    InvalidK,
    #[error("index file {path}: {msg}")]
    Store { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// BM25 hyperparameters: `k1` saturates term frequency, `b` controls
/// length normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params<S> {
    pub k1: S,
    pub b: S,
}

impl<S: Scalar> Bm25Params<S> {
    pub fn new(k1: S, b: S) -> Result<Self, LexicalError> {
        if k1 < S::zero() || b < S::zero() || b > S::one() {
            return Err(LexicalError::InvalidParams {
                k1: k1.to_f64().unwrap_or(f64::NAN),
                b: b.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { k1, b })
    }
}

impl<S: Scalar> Default for Bm25Params<S> {
    /// The canonical k1 = 1.2, b = 0.75.
    fn default() -> Self {
        Self {
            k1: S::from_f64(1.2).unwrap(),
            b: S::from_f64(0.75).unwrap(),
        }
    }
}

/// How repeated query terms contribute to the score sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryTermSemantics {
    /// Each occurrence in the query token stream contributes a summand.
    #[default]
    Stream,
    /// Distinct terms contribute once.
    Set,
}

impl QueryTermSemantics {
    pub fn apply(self, tokens: &TokenStream) -> TokenStream {
        match self {
            QueryTermSemantics::Stream => tokens.clone(),
            QueryTermSemantics::Set => tokens.deduped(),
        }
    }
}

/// Term postings plus the collection statistics BM25 consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// term -> (doc id, term frequency), sorted by doc id.
    postings: BTreeMap<String, Vec<(DocId, u32)>>,
    /// doc id -> token count.
    doc_lengths: BTreeMap<DocId, u32>,
    /// term -> number of documents containing it.
    doc_freq: BTreeMap<String, u32>,
    total_docs: usize,
    avg_doc_length: f64,
    /// Parameters the index was built with; searches may override.
    params: Bm25Params<f64>,
}

impl InvertedIndex {
    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.doc_lengths.get(doc_id).copied()
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lengths.contains_key(doc_id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &DocId> {
        self.doc_lengths.keys()
    }

    pub fn params(&self) -> Bm25Params<f64> {
        self.params
    }

    /// Frequency of `term` in `doc_id` (0 when absent).
    pub fn term_freq(&self, term: &str, doc_id: &str) -> u32 {
        self.postings
            .get(term)
            .and_then(|ps| {
                ps.binary_search_by(|(d, _)| d.as_str().cmp(doc_id))
                    .ok()
                    .map(|i| ps[i].1)
            })
            .unwrap_or(0)
    }

    /// Verifies the structural invariants (used after deserialization).
    pub fn validate(&self) -> Result<(), LexicalError> {
        let integrity = |msg: String| LexicalError::Store { path: "<memory>".into(), msg };
        if self.total_docs != self.doc_lengths.len() {
            return Err(integrity(format!(
                "total_docs {} != doc_lengths {}",
                self.total_docs,
                self.doc_lengths.len()
            )));
        }
        if self.total_docs == 0 {
            return Err(LexicalError::EmptyCorpus);
        }
        let mean = self.doc_lengths.values().map(|&l| u64::from(l)).sum::<u64>() as f64
            / self.total_docs as f64;
        if (mean - self.avg_doc_length).abs() > 1e-12 {
            return Err(integrity(format!(
                "avg_doc_length {} != mean doc length {}",
                self.avg_doc_length, mean
            )));
        }
        for (term, ps) in &self.postings {
            if self.doc_freq.get(term).copied() != Some(ps.len() as u32) {
                return Err(integrity(format!("doc_freq[{term:?}] != postings length")));
            }
            for window in ps.windows(2) {
                if window[0].0 >= window[1].0 {
                    return Err(integrity(format!("postings for {term:?} not sorted by doc id")));
                }
            }
            for (doc_id, tf) in ps {
                if !self.doc_lengths.contains_key(doc_id) {
                    return Err(integrity(format!("posting references unknown doc {doc_id:?}")));
                }
                if *tf == 0 {
                    return Err(integrity(format!("zero term frequency for ({term:?}, {doc_id:?})")));
                }
            }
        }
        if self.doc_freq.len() != self.postings.len() {
            return Err(integrity("doc_freq and postings disagree on vocabulary".into()));
        }
        Ok(())
    }
}

/// Builds the inverted index over `title + " " + body` of each document.
///
/// Deterministic regardless of input order: postings are sorted by doc id
/// and all statistics derive from order-free aggregates.
pub fn build_index(docs: &[Document], params: Bm25Params<f64>) -> Result<InvertedIndex, LexicalError> {
    Bm25Params::<f64>::new(params.k1, params.b)?;
    if docs.is_empty() {
        return Err(LexicalError::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<(DocId, u32)>> = BTreeMap::new();
    let mut doc_lengths: BTreeMap<DocId, u32> = BTreeMap::new();
    for doc in docs {
        if doc_lengths.contains_key(&doc.id) {
            return Err(LexicalError::DuplicateDoc(doc.id.clone()));
        }
        let tokens = tokenize(&doc.indexable_text());
        doc_lengths.insert(doc.id.clone(), tokens.len() as u32);
        let mut freqs: BTreeMap<&str, u32> = BTreeMap::new();
        for token in tokens.iter() {
            *freqs.entry(token).or_insert(0) += 1;
        }
        for (term, freq) in freqs {
            postings.entry(term.to_string()).or_default().push((doc.id.clone(), freq));
        }
    }
    for list in postings.values_mut() {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    let doc_freq = postings.iter().map(|(t, ps)| (t.clone(), ps.len() as u32)).collect();
    let total_docs = doc_lengths.len();
    let avg_doc_length =
        doc_lengths.values().map(|&l| u64::from(l)).sum::<u64>() as f64 / total_docs as f64;
    let index = InvertedIndex { postings, doc_lengths, doc_freq, total_docs, avg_doc_length, params };
    debug_assert!(index.validate().is_ok());
    Ok(index)
}

/// Natural-log inverse document frequency. Terms absent from the corpus
/// use a document frequency of zero; the "+1" inside the log keeps every
/// value strictly positive.
pub fn idf<S: Scalar>(index: &InvertedIndex, term: &str) -> S {
    let half = S::from_f64(0.5).unwrap();
    let n = S::from_usize(index.total_docs).unwrap();
    let nt = S::from_u32(index.doc_freq(term)).unwrap();
    ((n - nt + half) / (nt + half) + S::one()).ln()
}

fn tf_component<S: Scalar>(params: &Bm25Params<S>, freq: u32, doc_len: u32, avg_doc_length: f64) -> S {
    let f = S::from_u32(freq).unwrap();
    let dl = S::from_u32(doc_len).unwrap();
    let avg = S::from_f64(avg_doc_length).unwrap();
    let norm = S::one() - params.b + params.b * dl / avg;
    ((params.k1 + S::one()) * f) / (params.k1 * norm + f)
}

/// BM25 score of one document for a query token stream. Each occurrence in
/// the stream contributes a summand; pass a deduped stream for set
/// semantics.
pub fn bm25_score<S: Scalar>(
    index: &InvertedIndex,
    params: &Bm25Params<S>,
    query: &TokenStream,
    doc_id: &str,
) -> Result<S, LexicalError> {
    let doc_len = index
        .doc_length(doc_id)
        .ok_or_else(|| LexicalError::UnknownDoc(doc_id.to_string()))?;
    let mut score = S::zero();
    for term in query.iter() {
        let freq = index.term_freq(term, doc_id);
        if freq == 0 {
            continue;
        }
        let idf_val: S = idf(index, term);
        score += idf_val * tf_component(params, freq, doc_len, index.avg_doc_length);
    }
    Ok(score)
}

/// Ranks up to `k` documents containing at least one query term, by BM25
/// score descending with ties broken by ascending doc id.
pub fn lexical_search<S: Scalar>(
    index: &InvertedIndex,
    params: &Bm25Params<S>,
    query: &Query,
    k: usize,
) -> Result<RankedList<S>, LexicalError> {
    let tokens = tokenize(&query.text);
    lexical_search_tokens(index, params, &query.id, &tokens, k)
}

/// `lexical_search` over a pre-tokenized query (after any term-semantics
/// transform).
pub fn lexical_search_tokens<S: Scalar>(
    index: &InvertedIndex,
    params: &Bm25Params<S>,
    query_id: &str,
    tokens: &TokenStream,
    k: usize,
) -> Result<RankedList<S>, LexicalError> {
    if k == 0 {
        return Err(LexicalError::InvalidK);
    }
    // Candidates: every doc holding >= 1 query term, gathered in id order.
    let mut candidates: BTreeSet<&DocId> = BTreeSet::new();
    for term in tokens.iter() {
        if let Some(ps) = index.postings.get(term) {
            candidates.extend(ps.iter().map(|(d, _)| d));
        }
    }
    // Rescoring each candidate through bm25_score keeps the summation
    // order identical to the brute-force path, so scores match bit for bit.
    let mut scored = Vec::with_capacity(candidates.len());
    for doc_id in candidates {
        let score = bm25_score(index, params, tokens, doc_id)?;
        scored.push((doc_id.clone(), score));
    }
    Ok(RankedList::from_scored(query_id, scored).truncated(k))
}
