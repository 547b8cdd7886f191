//! Hybrid lexical/semantic retrieval with retrieval-augmented answer
//! generation and an IR/QA evaluation suite.
//!
//! The pipeline: index -> retrieve -> re-rank -> prompt -> generate ->
//! filter -> score. Core math is generic over the floating-point scalar
//! (`f32` or `f64`) via [`Scalar`]; the aliases below fix the default.

pub mod corpus;
pub mod evalkit;
pub mod lexical;
pub mod ragen;
pub mod rank;
pub mod rerank;
pub mod scalar;
pub mod semantic;
pub mod trec;
pub mod util;

pub use scalar::Scalar;

/// Default scalar for scores, similarities, and metrics.
pub type Score = f64;
/// BM25 parameters at the default scalar.
pub type Bm25 = lexical::Bm25Params<Score>;
/// Dense embedding at the default scalar.
pub type DenseVector = semantic::Embedding<Score>;
/// Vector index at the default scalar.
pub type DenseIndex = semantic::VectorIndex<Score>;
/// Ranked result list at the default scalar.
pub type Ranking = rank::RankedList<Score>;
/// Fusion strategy at the default scalar.
pub type Fusion = rerank::FusionStrategy<Score>;
