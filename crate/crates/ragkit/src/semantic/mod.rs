//! Dense-vector retrieval: encoding, cosine similarity, and exhaustive
//! exact top-k search (no approximation).

mod encode;
mod store;

use thiserror::Error;

pub use encode::{
    EmbeddingCache, EncoderHandle, RemoteEncoderConfig, TrigramEncoder, DEFAULT_ENCODER_DIM,
};
pub use store::{load_vector_index, save_vector_index, VECTOR_INDEX_VERSION};

use crate::corpus::{DocId, Document};
use crate::rank::RankedList;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("embedding must have a positive dimension")]
    EmptyEmbedding,
    #[error("non-finite embedding value")]
    NonFiniteValue,
    #[error("zero-norm embedding")]
    ZeroNorm,
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(DocId),
    #[error("document {doc_id:?}: {source}")]
    Doc {
        doc_id: DocId,
        #[source]
        source: Box<SemanticError>,
    },
    #[error("batch item {item}: {source}")]
    BatchItem {
        item: usize,
        #[source]
        source: Box<SemanticError>,
    },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("encoder integrity error: {0}")]
    Integrity(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("vector index file {path}: {msg}")]
    Store { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn doc_err(doc_id: &str, source: SemanticError) -> SemanticError {
    SemanticError::Doc { doc_id: doc_id.to_string(), source: Box::new(source) }
}

/// A fixed-length dense vector. Values are finite; zero-norm embeddings
/// are representable but rejected at index admission.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S> {
    values: Vec<S>,
}

impl<S: Scalar> Embedding<S> {
    pub fn new(values: Vec<S>) -> Result<Self, SemanticError> {
        if values.is_empty() {
            return Err(SemanticError::EmptyEmbedding);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SemanticError::NonFiniteValue);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn norm(&self) -> S {
        self.values.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    pub fn scaled(&self, factor: S) -> Embedding<S> {
        Embedding { values: self.values.iter().map(|&v| v * factor).collect() }
    }
}

/// Cosine similarity: dot product over the product of Euclidean norms.
/// Errors on dimension mismatch or a zero-norm operand.
pub fn cosine_sim<S: Scalar>(a: &Embedding<S>, b: &Embedding<S>) -> Result<S, SemanticError> {
    if a.dim() != b.dim() {
        return Err(SemanticError::DimMismatch { left: a.dim(), right: b.dim() });
    }
    let mut dot = S::zero();
    let mut norm_a = S::zero();
    let mut norm_b = S::zero();
    for (&x, &y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == S::zero() || norm_b == S::zero() {
        return Err(SemanticError::ZeroNorm);
    }
    Ok(dot / (norm_a.sqrt() * norm_b.sqrt()))
}

/// Document embeddings for exhaustive search. Entries are kept sorted by
/// doc id; every embedding shares the index dimension and has positive
/// norm.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<S> {
    dim: usize,
    entries: Vec<(DocId, Embedding<S>)>,
}

impl<S: Scalar> VectorIndex<S> {
    pub fn from_entries(dim: usize, mut entries: Vec<(DocId, Embedding<S>)>) -> Result<Self, SemanticError> {
        if dim == 0 {
            return Err(SemanticError::EmptyEmbedding);
        }
        for (doc_id, emb) in &entries {
            if emb.dim() != dim {
                return Err(doc_err(doc_id, SemanticError::DimMismatch { left: dim, right: emb.dim() }));
            }
            if emb.norm() == S::zero() {
                return Err(doc_err(doc_id, SemanticError::ZeroNorm));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(SemanticError::DuplicateDoc(pair[0].0.clone()));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(DocId, Embedding<S>)] {
        &self.entries
    }

    pub fn embedding(&self, doc_id: &str) -> Option<&Embedding<S>> {
        self.entries
            .binary_search_by(|(d, _)| d.as_str().cmp(doc_id))
            .ok()
            .map(|i| &self.entries[i].1)
    }
}

/// Exact top-k by cosine similarity, descending, ties broken by ascending
/// doc id. Scans every entry; an empty index yields an empty list.
pub fn semantic_search<S: Scalar>(
    index: &VectorIndex<S>,
    query_id: &str,
    query_vec: &Embedding<S>,
    k: usize,
) -> Result<RankedList<S>, SemanticError> {
    if k == 0 {
        return Err(SemanticError::InvalidK);
    }
    if index.is_empty() {
        return Ok(RankedList::from_scored(query_id, Vec::new()));
    }
    if query_vec.dim() != index.dim {
        return Err(SemanticError::DimMismatch { left: query_vec.dim(), right: index.dim });
    }
    let mut scored = Vec::with_capacity(index.len());
    for (doc_id, emb) in &index.entries {
        scored.push((doc_id.clone(), cosine_sim(query_vec, emb)?));
    }
    Ok(RankedList::from_scored(query_id, scored).truncated(k))
}

/// Encodes every document (`title + " " + body`) and assembles the index.
/// Encoding failures carry the offending doc id; the result is independent
/// of document order and encoder batch size.
pub fn build_vector_index<S: Scalar>(
    encoder: &EncoderHandle,
    docs: &[Document],
) -> Result<VectorIndex<S>, SemanticError> {
    if docs.is_empty() {
        return Err(SemanticError::Integrity("cannot index an empty corpus".into()));
    }
    let texts: Vec<String> = docs.iter().map(|d| d.indexable_text()).collect();
    let embeddings = encoder.encode_batch::<S>(&texts).map_err(|e| match e {
        SemanticError::BatchItem { item, source } => doc_err(&docs[item].id, *source),
        other => other,
    })?;
    let entries = docs
        .iter()
        .zip(embeddings)
        .map(|(doc, emb)| (doc.id.clone(), emb))
        .collect();
    VectorIndex::from_entries(encoder.dim(), entries)
}
