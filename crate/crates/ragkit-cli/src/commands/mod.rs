//! Subcommand implementations.

mod answer;
mod eval_qa;
mod eval_retrieval;
mod index;
mod manifest;
mod search;
mod sweep;

pub use answer::{cmd_answer, AnswerArgs};
pub use eval_qa::{cmd_eval_qa, EvalQaArgs};
pub use eval_retrieval::{cmd_eval_retrieval, EvalRetrievalArgs};
pub use index::cmd_index;
pub use manifest::{cmd_finetune_manifest, ManifestArgs};
pub use search::{cmd_search, SearchArgs};
pub use sweep::{cmd_sweep_topk, SweepArgs};
