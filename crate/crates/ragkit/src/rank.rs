//! Ranked result lists: the shared currency between retrieval, fusion,
//! and evaluation.

use std::cmp::Ordering;
use std::collections::HashSet;

use thiserror::Error;

use crate::corpus::{DocId, QueryId};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("ranks must be contiguous from 1: expected {expected}, found {found}")]
    NonContiguousRanks { expected: u32, found: u32 },
    #[error("scores must be non-increasing with rank (violated at rank {rank})")]
    IncreasingScore { rank: u32 },
    #[error("duplicate doc id {0:?} in ranked list")]
    DuplicateDoc(DocId),
    #[error("non-finite score for doc {0:?}")]
    NonFiniteScore(DocId),
}

/// One result: document, score, and 1-based rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry<S> {
    pub doc_id: DocId,
    pub score: S,
    pub rank: u32,
}

/// Per-query ordered results. Ranks are contiguous from 1, scores
/// non-increasing, doc ids unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<S> {
    pub query_id: QueryId,
    entries: Vec<RankedEntry<S>>,
}

impl<S: Scalar> RankedList<S> {
    /// Builds a list from raw `(doc, score)` pairs: sorts by score
    /// descending with ties broken by ascending doc id, then assigns ranks.
    ///
    /// This is the single ordering rule used by every search and fusion
    /// path, so tie-breaking is identical everywhere.
    pub fn from_scored(query_id: impl Into<QueryId>, mut scored: Vec<(DocId, S)>) -> Self {
        scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal) {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RankedEntry { doc_id, score, rank: i as u32 + 1 })
            .collect();
        Self { query_id: query_id.into(), entries }
    }

    /// Wraps pre-ranked entries, validating the list invariants.
    pub fn from_ranked(query_id: impl Into<QueryId>, entries: Vec<RankedEntry<S>>) -> Result<Self, RankError> {
        let list = Self { query_id: query_id.into(), entries };
        list.validate()?;
        Ok(list)
    }

    pub fn entries(&self) -> &[RankedEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &DocId> {
        self.entries.iter().map(|e| &e.doc_id)
    }

    /// Rank of `doc_id` in this list, if present.
    pub fn rank_of(&self, doc_id: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.doc_id == doc_id).map(|e| e.rank)
    }

    /// The list cut to its first `k` entries.
    pub fn truncated(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }

    /// Checks ranks contiguous from 1, scores non-increasing, ids unique,
    /// all scores finite.
    pub fn validate(&self) -> Result<(), RankError> {
        let mut seen = HashSet::new();
        let mut prev_score: Option<S> = None;
        for (i, entry) in self.entries.iter().enumerate() {
            let expected = i as u32 + 1;
            if entry.rank != expected {
                return Err(RankError::NonContiguousRanks { expected, found: entry.rank });
            }
            if !entry.score.is_finite() {
                return Err(RankError::NonFiniteScore(entry.doc_id.clone()));
            }
            if let Some(prev) = prev_score {
                if entry.score > prev {
                    return Err(RankError::IncreasingScore { rank: entry.rank });
                }
            }
            prev_score = Some(entry.score);
            if !seen.insert(entry.doc_id.as_str()) {
                return Err(RankError::DuplicateDoc(entry.doc_id.clone()));
            }
        }
        Ok(())
    }
}
