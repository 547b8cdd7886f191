//! Combines lexical and semantic ranked lists into the single context
//! list handed to answer generation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::DocId;
use crate::rank::RankedList;
use crate::scalar::Scalar;

/// Default weight of the semantic list in weighted fusion.
pub const DEFAULT_FUSION_ALPHA: f64 = 0.7;
/// Default rank constant for reciprocal rank fusion.
pub const DEFAULT_RRF_K: f64 = 60.0;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("query id mismatch: {lex:?} vs {sem:?}")]
    QueryIdMismatch { lex: String, sem: String },
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("rrf_k must be positive, got {0}")]
    InvalidRrfK(f64),
    #[error("k must be >= 1")]
    InvalidK,
}

/// How the two source lists are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionStrategy<S> {
    /// Pass the semantic list through unchanged.
    SemanticOnly,
    /// Pass the lexical list through unchanged.
    LexicalOnly,
    /// Min-max normalize each source over its own list, then mix:
    /// `alpha * semantic + (1 - alpha) * lexical`. Documents missing from
    /// one source contribute zero from it.
    Weighted { alpha: S },
    /// Reciprocal rank fusion: sum of `1 / (rrf_k + rank)` over the
    /// sources a document appears in.
    Rrf { rrf_k: S },
}

impl<S: Scalar> FusionStrategy<S> {
    pub fn weighted(alpha: S) -> Result<Self, FuseError> {
        if alpha < S::zero() || alpha > S::one() {
            return Err(FuseError::InvalidAlpha(alpha.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self::Weighted { alpha })
    }

    pub fn rrf(rrf_k: S) -> Result<Self, FuseError> {
        if rrf_k <= S::zero() {
            return Err(FuseError::InvalidRrfK(rrf_k.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self::Rrf { rrf_k })
    }

    /// Weighted fusion with the semantic side dominant (alpha = 0.7).
    pub fn default_weighted() -> Self {
        Self::Weighted { alpha: S::from_f64(DEFAULT_FUSION_ALPHA).unwrap() }
    }

    /// RRF with the customary rank constant 60.
    pub fn default_rrf() -> Self {
        Self::Rrf { rrf_k: S::from_f64(DEFAULT_RRF_K).unwrap() }
    }
}

/// Scores min-max normalized over one list; a constant list (including a
/// single entry) normalizes to all ones.
fn min_max_normalize<S: Scalar>(list: &RankedList<S>) -> BTreeMap<&DocId, S> {
    let entries = list.entries();
    let mut out = BTreeMap::new();
    if entries.is_empty() {
        return out;
    }
    let max = entries.first().unwrap().score;
    let min = entries.last().unwrap().score;
    let range = max - min;
    for entry in entries {
        let norm = if range == S::zero() { S::one() } else { (entry.score - min) / range };
        out.insert(&entry.doc_id, norm);
    }
    out
}

/// Fuses the two ranked lists for one query and truncates to `k`.
/// The output is sorted by fused score descending with ties broken by
/// ascending doc id.
pub fn fuse<S: Scalar>(
    lex: &RankedList<S>,
    sem: &RankedList<S>,
    strategy: &FusionStrategy<S>,
    k: usize,
) -> Result<RankedList<S>, FuseError> {
    if lex.query_id != sem.query_id {
        return Err(FuseError::QueryIdMismatch {
            lex: lex.query_id.clone(),
            sem: sem.query_id.clone(),
        });
    }
    if k == 0 {
        return Err(FuseError::InvalidK);
    }
    match strategy {
        FusionStrategy::SemanticOnly => Ok(sem.clone().truncated(k)),
        FusionStrategy::LexicalOnly => Ok(lex.clone().truncated(k)),
        FusionStrategy::Weighted { alpha } => {
            let lex_norm = min_max_normalize(lex);
            let sem_norm = min_max_normalize(sem);
            let mut union: BTreeSet<&DocId> = BTreeSet::new();
            union.extend(lex_norm.keys());
            union.extend(sem_norm.keys());
            let scored = union
                .into_iter()
                .map(|doc_id| {
                    let l = lex_norm.get(doc_id).copied().unwrap_or_else(S::zero);
                    let s = sem_norm.get(doc_id).copied().unwrap_or_else(S::zero);
                    (doc_id.clone(), *alpha * s + (S::one() - *alpha) * l)
                })
                .collect();
            Ok(RankedList::from_scored(&lex.query_id, scored).truncated(k))
        }
        FusionStrategy::Rrf { rrf_k } => {
            let mut scores: BTreeMap<&DocId, S> = BTreeMap::new();
            for list in [lex, sem] {
                for entry in list.entries() {
                    let contribution = S::one() / (*rrf_k + S::from_u32(entry.rank).unwrap());
                    *scores.entry(&entry.doc_id).or_insert_with(S::zero) += contribution;
                }
            }
            let scored = scores.into_iter().map(|(d, s)| (d.clone(), s)).collect();
            Ok(RankedList::from_scored(&lex.query_id, scored).truncated(k))
        }
    }
}
