//! Generation metrics: answer accuracy, ROUGE-1/2/L, and sentence BLEU.
//!
//! Texts are tokenized with the shared corpus tokenizer. BLEU smooths
//! clipped counts by add-one for orders >= 2 (unigram precision is left
//! exact so disjoint texts score zero) and uses only the n-gram orders the
//! candidate length supports.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::tokenize;
use crate::scalar::Scalar;

/// Fraction of predictions exactly equal to gold. Unparsable predictions
/// (`None`) count as wrong.
pub fn accuracy<S: Scalar>(predictions: &[Option<String>], gold: &[String]) -> Result<S, EvalError> {
    if predictions.is_empty() || gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let correct = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.as_deref() == Some(g.as_str()))
        .count();
    Ok(S::from_usize(correct).unwrap() / S::from_usize(gold.len()).unwrap())
}

/// n-gram precision/recall/F1 (F1 is the headline ROUGE value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl<S: Scalar> RougeScore<S> {
    fn from_counts(overlap: usize, cand_total: usize, ref_total: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                S::zero()
            } else {
                S::from_usize(num).unwrap() / S::from_usize(den).unwrap()
            }
        };
        let precision = ratio(overlap, cand_total);
        let recall = ratio(overlap, ref_total);
        let f1 = if precision + recall == S::zero() {
            S::zero()
        } else {
            S::from_f64(2.0).unwrap() * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Space-joined n-grams are unambiguous because tokens never contain
/// whitespace.
fn ngram_counts(tokens: &[String], n: usize) -> HashMap<String, u32> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.join(" ")).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(cand: &HashMap<String, u32>, reference: &HashMap<String, u32>) -> usize {
    cand.iter()
        .map(|(gram, &c)| c.min(reference.get(gram).copied().unwrap_or(0)) as usize)
        .sum()
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n<S: Scalar>(candidate: &str, reference: &str, n: usize) -> Result<RougeScore<S>, EvalError> {
    if n == 0 {
        return Err(EvalError::InvalidN);
    }
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let cand_counts = ngram_counts(cand_tokens.tokens(), n);
    let ref_counts = ngram_counts(ref_tokens.tokens(), n);
    let overlap = clipped_overlap(&cand_counts, &ref_counts);
    let cand_total = cand_tokens.len().saturating_sub(n - 1).min(cand_tokens.len());
    let ref_total = ref_tokens.len().saturating_sub(n - 1).min(ref_tokens.len());
    Ok(RougeScore::from_counts(overlap, cand_total, ref_total))
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(curr[j]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L over the longest common subsequence of token streams.
pub fn rouge_l<S: Scalar>(candidate: &str, reference: &str) -> Result<RougeScore<S>, EvalError> {
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let lcs = lcs_length(cand_tokens.tokens(), ref_tokens.tokens());
    Ok(RougeScore::from_counts(lcs, cand_tokens.len(), ref_tokens.len()))
}

/// Sentence BLEU: geometric mean of clipped n-gram precisions times the
/// brevity penalty.
pub fn bleu<S: Scalar>(candidate: &str, reference: &str, max_n: usize) -> Result<S, EvalError> {
    if max_n == 0 {
        return Err(EvalError::InvalidN);
    }
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let c = cand_tokens.len();
    let r = ref_tokens.len();
    if c == 0 || r == 0 {
        return Ok(S::zero());
    }
    let orders = max_n.min(c);
    let mut log_sum = 0.0f64;
    for n in 1..=orders {
        let cand_counts = ngram_counts(cand_tokens.tokens(), n);
        let ref_counts = ngram_counts(ref_tokens.tokens(), n);
        let overlap = clipped_overlap(&cand_counts, &ref_counts);
        let total = c - n + 1;
        let p = if n == 1 {
            overlap as f64 / total as f64
        } else {
            (overlap as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return Ok(S::zero());
        }
        log_sum += p.ln();
    }
    let geo_mean = (log_sum / orders as f64).exp();
    let brevity = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(S::from_f64(brevity * geo_mean).unwrap())
}

/// One generation example to score: model output vs reference answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationPair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

/// Reads a JSONL file of `{id, candidate, reference}` objects.
pub fn load_generation_pairs(path: &Path) -> Result<Vec<GenerationPair>, EvalError> {
    let file = File::open(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: GenerationPair = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// ROUGE/BLEU for one item (F-measures for the ROUGE columns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenItemMetrics<S> {
    pub rouge1: S,
    pub rouge2: S,
    pub rouge_l: S,
    pub bleu: S,
}

/// Macro-averaged generation metrics with the per-item breakdown retained.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMetricsReport<S> {
    pub per_item: Vec<(String, GenItemMetrics<S>)>,
}

impl<S: Scalar> GenMetricsReport<S> {
    pub fn item_count(&self) -> usize {
        self.per_item.len()
    }

    fn mean(&self, pick: impl Fn(&GenItemMetrics<S>) -> S) -> S {
        let total: S = self.per_item.iter().map(|(_, m)| pick(m)).sum();
        total / S::from_usize(self.per_item.len()).unwrap()
    }

    pub fn mean_rouge1(&self) -> S {
        self.mean(|m| m.rouge1)
    }

    pub fn mean_rouge2(&self) -> S {
        self.mean(|m| m.rouge2)
    }

    pub fn mean_rouge_l(&self) -> S {
        self.mean(|m| m.rouge_l)
    }

    pub fn mean_bleu(&self) -> S {
        self.mean(|m| m.bleu)
    }

    fn rows(&self) -> Vec<(&'static str, f64)> {
        let x100 = |v: S| v.to_f64().unwrap_or(f64::NAN) * 100.0;
        vec![
            ("ROUGE-1", x100(self.mean_rouge1())),
            ("ROUGE-2", x100(self.mean_rouge2())),
            ("ROUGE-L", x100(self.mean_rouge_l())),
            ("BLEU", x100(self.mean_bleu())),
        ]
    }

    /// Aligned text table, values scaled by 100.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<8} {:>10}\n", "Metric", "Value"));
        for (name, value) in self.rows() {
            out.push_str(&format!("{name:<8} {value:>10.5}\n"));
        }
        out.push_str(&format!("items={}\n", self.item_count()));
        out
    }

    /// Machine-readable report: aggregates scaled by 100, per-item raw.
    pub fn to_json(&self) -> serde_json::Value {
        let metrics: serde_json::Map<String, serde_json::Value> = self
            .rows()
            .into_iter()
            .map(|(name, value)| (name.to_string(), serde_json::json!(value)))
            .collect();
        let per_item: serde_json::Map<String, serde_json::Value> = self
            .per_item
            .iter()
            .map(|(id, m)| {
                let value = serde_json::json!({
                    "rouge1": m.rouge1.to_f64(),
                    "rouge2": m.rouge2.to_f64(),
                    "rouge_l": m.rouge_l.to_f64(),
                    "bleu": m.bleu.to_f64(),
                });
                (id.clone(), value)
            })
            .collect();
        serde_json::json!({
            "item_count": self.item_count(),
            "metrics": metrics,
            "per_item": per_item,
        })
    }
}

/// Scores every pair with ROUGE-1/2/L and BLEU (max order 4).
pub fn evaluate_generation<S: Scalar>(pairs: &[GenerationPair]) -> Result<GenMetricsReport<S>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut per_item = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let metrics = GenItemMetrics {
            rouge1: rouge_n(&pair.candidate, &pair.reference, 1)?.f1,
            rouge2: rouge_n(&pair.candidate, &pair.reference, 2)?.f1,
            rouge_l: rouge_l(&pair.candidate, &pair.reference)?.f1,
            bleu: bleu(&pair.candidate, &pair.reference, 4)?,
        };
        per_item.push((pair.id.clone(), metrics));
    }
    Ok(GenMetricsReport { per_item })
}
