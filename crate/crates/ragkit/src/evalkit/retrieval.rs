//! Ranking metrics at a cutoff, macro-averaged over queries.
//!
//! DCG uses the traditional form `rel / log2(rank + 1)` with raw graded
//! gains. "Relevant" for the binary metrics means grade >= 1. Queries with
//! zero judged-relevant documents have no defined NDCG/Recall/F1/MAP and
//! are excluded from those macro-averages; the exclusion count is
//! reported.

use std::collections::BTreeMap;

use super::EvalError;
use crate::corpus::{QueryId, RelevanceJudgments};
use crate::rank::RankedList;
use crate::scalar::Scalar;

fn grade(qrels: &RelevanceJudgments, query_id: &str, doc_id: &str) -> u32 {
    qrels.grade(query_id, doc_id).unwrap_or(0)
}

fn discount<S: Scalar>(rank_1based: usize) -> S {
    S::from_usize(rank_1based + 1).unwrap().log2()
}

/// Discounted cumulative gain over the top `k`: unjudged documents gain 0.
pub fn dcg_at_k<S: Scalar>(ranked: &RankedList<S>, qrels: &RelevanceJudgments, k: usize) -> S {
    let mut total = S::zero();
    for (i, entry) in ranked.entries().iter().take(k).enumerate() {
        let g = grade(qrels, &ranked.query_id, &entry.doc_id);
        if g > 0 {
            total += S::from_u32(g).unwrap() / discount::<S>(i + 1);
        }
    }
    total
}

fn ideal_dcg_at_k<S: Scalar>(qrels: &RelevanceJudgments, query_id: &str, k: usize) -> S {
    let mut grades: Vec<u32> = qrels
        .judged(query_id)
        .map(|m| m.values().copied().collect())
        .unwrap_or_default();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let mut total = S::zero();
    for (i, g) in grades.into_iter().take(k).enumerate() {
        if g > 0 {
            total += S::from_u32(g).unwrap() / discount::<S>(i + 1);
        }
    }
    total
}

/// Normalized DCG. `None` when the query has no judged-relevant document
/// (the metric is undefined there).
pub fn ndcg_at_k<S: Scalar>(
    ranked: &RankedList<S>,
    qrels: &RelevanceJudgments,
    k: usize,
) -> Option<S> {
    if qrels.relevant_count(&ranked.query_id) == 0 {
        return None;
    }
    Some(dcg_at_k(ranked, qrels, k) / ideal_dcg_at_k(qrels, &ranked.query_id, k))
}

/// Reciprocal rank of the first grade >= 1 document within the top `k`,
/// zero if none.
pub fn mrr_at_k<S: Scalar>(ranked: &RankedList<S>, qrels: &RelevanceJudgments, k: usize) -> S {
    for (i, entry) in ranked.entries().iter().take(k).enumerate() {
        if grade(qrels, &ranked.query_id, &entry.doc_id) >= 1 {
            return S::one() / S::from_usize(i + 1).unwrap();
        }
    }
    S::zero()
}

/// Precision, recall, and F1 at `k`. Precision divides by `k` even when
/// fewer documents were retrieved. Recall and F1 are `None` for queries
/// with zero judged-relevant documents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecallF1<S> {
    pub precision: S,
    pub recall: Option<S>,
    pub f1: Option<S>,
}

pub fn precision_recall_f1_at_k<S: Scalar>(
    ranked: &RankedList<S>,
    qrels: &RelevanceJudgments,
    k: usize,
) -> PrecisionRecallF1<S> {
    let hits = ranked
        .entries()
        .iter()
        .take(k)
        .filter(|e| grade(qrels, &ranked.query_id, &e.doc_id) >= 1)
        .count();
    let precision = S::from_usize(hits).unwrap() / S::from_usize(k).unwrap();
    let relevant = qrels.relevant_count(&ranked.query_id);
    if relevant == 0 {
        return PrecisionRecallF1 { precision, recall: None, f1: None };
    }
    let recall = S::from_usize(hits).unwrap() / S::from_usize(relevant).unwrap();
    let two = S::from_f64(2.0).unwrap();
    let f1 = if precision + recall == S::zero() {
        S::zero()
    } else {
        two * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 { precision, recall: Some(recall), f1: Some(f1) }
}

/// Average precision at `k`: the sum of precision@i over relevant hits,
/// divided by `min(|relevant|, k)`. `None` when the query has no
/// judged-relevant document.
pub fn average_precision_at_k<S: Scalar>(
    ranked: &RankedList<S>,
    qrels: &RelevanceJudgments,
    k: usize,
) -> Option<S> {
    let relevant = qrels.relevant_count(&ranked.query_id);
    if relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut total = S::zero();
    for (i, entry) in ranked.entries().iter().take(k).enumerate() {
        if grade(qrels, &ranked.query_id, &entry.doc_id) >= 1 {
            hits += 1;
            total += S::from_usize(hits).unwrap() / S::from_usize(i + 1).unwrap();
        }
    }
    Some(total / S::from_usize(relevant.min(k)).unwrap())
}

/// All metrics for one query.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QueryRetrievalMetrics<S> {
    pub dcg: S,
    pub ndcg: Option<S>,
    pub mrr: S,
    pub precision: S,
    pub recall: Option<S>,
    pub f1: Option<S>,
    pub average_precision: Option<S>,
}

/// Macro-averaged metrics with the per-query breakdown retained.
///
/// Aggregates are arithmetic means of the per-query values, skipping
/// queries where a metric is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalMetricsReport<S> {
    pub k: usize,
    pub per_query: BTreeMap<QueryId, QueryRetrievalMetrics<S>>,
    /// Queries in the run that have no qrels entry at all (skipped).
    pub unknown_queries: Vec<QueryId>,
    /// Judged queries with zero grade >= 1 documents (excluded from the
    /// NDCG/Recall/F1/MAP means).
    pub zero_relevant_queries: usize,
}

fn mean<S: Scalar>(values: impl Iterator<Item = S>) -> Option<S> {
    let mut count = 0usize;
    let mut total = S::zero();
    for v in values {
        total += v;
        count += 1;
    }
    (count > 0).then(|| total / S::from_usize(count).unwrap())
}

impl<S: Scalar> RetrievalMetricsReport<S> {
    pub fn query_count(&self) -> usize {
        self.per_query.len()
    }

    pub fn mean_dcg(&self) -> Option<S> {
        mean(self.per_query.values().map(|m| m.dcg))
    }

    pub fn mean_ndcg(&self) -> Option<S> {
        mean(self.per_query.values().filter_map(|m| m.ndcg))
    }

    pub fn mean_mrr(&self) -> Option<S> {
        mean(self.per_query.values().map(|m| m.mrr))
    }

    pub fn mean_precision(&self) -> Option<S> {
        mean(self.per_query.values().map(|m| m.precision))
    }

    pub fn mean_recall(&self) -> Option<S> {
        mean(self.per_query.values().filter_map(|m| m.recall))
    }

    pub fn mean_f1(&self) -> Option<S> {
        mean(self.per_query.values().filter_map(|m| m.f1))
    }

    pub fn mean_average_precision(&self) -> Option<S> {
        mean(self.per_query.values().filter_map(|m| m.average_precision))
    }

    fn rows(&self) -> Vec<(String, Option<f64>)> {
        let x100 = |v: Option<S>| v.and_then(|s| s.to_f64()).map(|f| f * 100.0);
        vec![
            (format!("DCG@{}", self.k), self.mean_dcg().and_then(|s| s.to_f64())),
            (format!("NDCG@{}", self.k), x100(self.mean_ndcg())),
            (format!("MRR@{}", self.k), x100(self.mean_mrr())),
            (format!("Precision@{}", self.k), x100(self.mean_precision())),
            (format!("Recall@{}", self.k), x100(self.mean_recall())),
            (format!("F1-score@{}", self.k), x100(self.mean_f1())),
            (format!("MAP@{}", self.k), x100(self.mean_average_precision())),
        ]
    }

    /// Aligned text table. Rate metrics are scaled by 100; DCG is raw.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14} {:>10}\n", "Metric", "Value"));
        for (name, value) in self.rows() {
            match value {
                Some(v) => out.push_str(&format!("{name:<14} {v:>10.5}\n")),
                None => out.push_str(&format!("{name:<14} {:>10}\n", "n/a")),
            }
        }
        out.push_str(&format!(
            "queries={} unknown={} zero_relevant={}\n",
            self.query_count(),
            self.unknown_queries.len(),
            self.zero_relevant_queries
        ));
        out
    }

    /// Machine-readable report. `metrics` follows the table convention
    /// (rates scaled by 100); `per_query` keeps raw [0, 1] values.
    pub fn to_json(&self) -> serde_json::Value {
        let metrics: serde_json::Map<String, serde_json::Value> = self
            .rows()
            .into_iter()
            .map(|(name, value)| {
                let v = value.map_or(serde_json::Value::Null, |f| serde_json::json!(f));
                (name, v)
            })
            .collect();
        let per_query: serde_json::Map<String, serde_json::Value> = self
            .per_query
            .iter()
            .map(|(q, m)| {
                let value = serde_json::json!({
                    "dcg": m.dcg.to_f64(),
                    "ndcg": m.ndcg.map(|v| v.to_f64()),
                    "mrr": m.mrr.to_f64(),
                    "precision": m.precision.to_f64(),
                    "recall": m.recall.map(|v| v.to_f64()),
                    "f1": m.f1.map(|v| v.to_f64()),
                    "average_precision": m.average_precision.map(|v| v.to_f64()),
                });
                (q.clone(), value)
            })
            .collect();
        serde_json::json!({
            "k": self.k,
            "query_count": self.query_count(),
            "unknown_queries": self.unknown_queries,
            "zero_relevant_queries": self.zero_relevant_queries,
            "metrics": metrics,
            "per_query": per_query,
        })
    }
}

/// Evaluates ranked lists against judgments at cutoff `k`. Queries absent
/// from the qrels are skipped and reported in `unknown_queries`.
pub fn evaluate_run<S: Scalar>(
    runs: &[RankedList<S>],
    qrels: &RelevanceJudgments,
    k: usize,
) -> Result<RetrievalMetricsReport<S>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if runs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut per_query = BTreeMap::new();
    let mut unknown_queries = Vec::new();
    let mut zero_relevant_queries = 0usize;
    for run in runs {
        if per_query.contains_key(&run.query_id) || unknown_queries.contains(&run.query_id) {
            return Err(EvalError::DuplicateQuery(run.query_id.clone()));
        }
        if !qrels.contains_query(&run.query_id) {
            unknown_queries.push(run.query_id.clone());
            continue;
        }
        if qrels.relevant_count(&run.query_id) == 0 {
            zero_relevant_queries += 1;
        }
        let prf = precision_recall_f1_at_k(run, qrels, k);
        per_query.insert(
            run.query_id.clone(),
            QueryRetrievalMetrics {
                dcg: dcg_at_k(run, qrels, k),
                ndcg: ndcg_at_k(run, qrels, k),
                mrr: mrr_at_k(run, qrels, k),
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                average_precision: average_precision_at_k(run, qrels, k),
            },
        );
    }
    Ok(RetrievalMetricsReport { k, per_query, unknown_queries, zero_relevant_queries })
}
