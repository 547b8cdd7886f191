//! Retrieval and generation evaluation: DCG/NDCG/MRR/Precision/Recall/F1/
//! MAP at a cutoff, answer accuracy, and ROUGE-1/2/L plus BLEU.

mod generation;
mod retrieval;

use thiserror::Error;

pub use generation::{
    accuracy, bleu, evaluate_generation, load_generation_pairs, rouge_l, rouge_n,
    GenItemMetrics, GenMetricsReport, GenerationPair, RougeScore,
};
pub use retrieval::{
    average_precision_at_k, dcg_at_k, evaluate_run, mrr_at_k, ndcg_at_k,
    precision_recall_f1_at_k, PrecisionRecallF1, QueryRetrievalMetrics, RetrievalMetricsReport,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate empty input")]
    EmptyInput,
    #[error("prediction/gold length mismatch: {predictions} vs {gold}")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("n-gram order must be >= 1")]
    InvalidN,
    #[error("duplicate query id {0:?} in run")]
    DuplicateQuery(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}
