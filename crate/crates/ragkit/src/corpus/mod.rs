//! Benchmark corpora: documents, queries, relevance judgments, and the
//! shared tokenizer used by lexical indexing and n-gram metrics.

mod load;
mod token;

use std::collections::BTreeMap;

use thiserror::Error;

pub use load::{load_corpus, load_qrels, load_queries, save_corpus, CorpusFormat};
pub use token::{tokenize, TokenStream};

/// Document identifier, unique within a corpus.
pub type DocId = String;
/// Query identifier, unique within a query set.
pub type QueryId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("integrity error: {0}")]
    Integrity(String),
}

/// A corpus document. `title` is `None` when the source had an empty title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: DocId,
    pub title: Option<String>,
    pub body: String,
}

impl Document {
    /// Validates the document invariants: non-empty id, and a non-empty
    /// title whenever the body is empty.
    pub fn new(id: impl Into<DocId>, title: Option<String>, body: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let body = body.into();
        if id.is_empty() {
            return Err(CorpusError::Integrity("document id must be non-empty".into()));
        }
        let title = title.filter(|t| !t.is_empty());
        if body.is_empty() && title.is_none() {
            return Err(CorpusError::Integrity(format!(
                "document {id}: body may be empty only if title is non-empty"
            )));
        }
        Ok(Self { id, title, body })
    }

    /// Text that indexing and encoding operate on: `title + " " + body`.
    pub fn indexable_text(&self) -> String {
        match &self.title {
            Some(title) => format!("{title} {}", self.body),
            None => self.body.clone(),
        }
    }
}

/// A benchmark query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: QueryId,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<QueryId>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(CorpusError::Integrity("query id must be non-empty".into()));
        }
        if text.is_empty() {
            return Err(CorpusError::Integrity(format!("query {id}: text must be non-empty")));
        }
        Ok(Self { id, text })
    }
}

/// Graded relevance judgments: query id -> doc id -> grade (>= 0).
///
/// A `(query, doc)` pair can be judged at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceJudgments {
    entries: BTreeMap<QueryId, BTreeMap<DocId, u32>>,
}

impl RelevanceJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a judgment. Duplicate `(query, doc)` pairs violate the
    /// at-most-once invariant and are rejected.
    pub fn insert(&mut self, query_id: impl Into<QueryId>, doc_id: impl Into<DocId>, grade: u32) -> Result<(), CorpusError> {
        let query_id = query_id.into();
        let doc_id = doc_id.into();
        let per_query = self.entries.entry(query_id.clone()).or_default();
        if per_query.contains_key(&doc_id) {
            return Err(CorpusError::Integrity(format!(
                "duplicate judgment for ({query_id}, {doc_id})"
            )));
        }
        per_query.insert(doc_id, grade);
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.entries.get(query_id).and_then(|m| m.get(doc_id)).copied()
    }

    /// All judgments for one query, if any.
    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<DocId, u32>> {
        self.entries.get(query_id)
    }

    /// Number of judged documents with grade >= 1 for the query.
    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.entries
            .get(query_id)
            .map(|m| m.values().filter(|&&g| g >= 1).count())
            .unwrap_or(0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &QueryId> {
        self.entries.keys()
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.entries.contains_key(query_id)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
