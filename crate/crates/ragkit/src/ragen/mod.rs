//! Retrieval-augmented answer generation: task profiles, prompt
//! construction, backend invocation, and confidence filtering with
//! one-shot refinement.

mod backend;

use std::io::Write;

use std::collections::BTreeMap;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    CompletionRequest, CompletionResponse, LlmBackend, MockBackend, RemoteBackend,
    RemoteBackendConfig,
};

use crate::corpus::{DocId, Document, Query};
use crate::rank::RankedList;
use crate::scalar::Scalar;

/// Default confidence threshold below which an answer is refined.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.1;
/// Default character budget for packed passages.
pub const DEFAULT_CONTEXT_BUDGET: usize = 8000;

const TRUNCATION_MARKER: &str = "...[truncated]";

#[derive(Debug, Error)]
pub enum RagenError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned an empty answer")]
    EmptyAnswer,
    #[error("no parsable answer label in {0:?}")]
    Unparsable(String),
    #[error("mock script error: {0}")]
    Script(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("invalid generation profile: {0}")]
    InvalidProfile(String),
    #[error("unknown document id {0:?} in ranked contexts")]
    UnknownDoc(DocId),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The three QA task shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ClosedEnded,
    LongForm,
    ShortForm,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ClosedEnded => "closed_ended",
            TaskKind::LongForm => "long_form",
            TaskKind::ShortForm => "short_form",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed_ended" => Ok(TaskKind::ClosedEnded),
            "long_form" => Ok(TaskKind::LongForm),
            "short_form" => Ok(TaskKind::ShortForm),
            other => Err(format!("unknown task {other:?} (expected closed_ended, long_form, or short_form)")),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoding configuration for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationProfile {
    pub task: TaskKind,
    pub system_message: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub stop: Option<Vec<String>>,
}

impl GenerationProfile {
    /// Multiple-choice / yes-no answering: a single letter, near-greedy.
    pub fn closed_ended() -> Self {
        Self {
            task: TaskKind::ClosedEnded,
            system_message: "You are an expert medical AI assistant. Answer the following question using only one letter: A, B, C, or D.".to_string(),
            max_tokens: 2,
            temperature: 0.1,
            top_p: 0.7,
            frequency_penalty: 0.5,
            presence_penalty: 0.1,
            stop: Some(vec!["\n".to_string()]),
        }
    }

    /// Detailed structured explanations.
    pub fn long_form() -> Self {
        Self {
            task: TaskKind::LongForm,
            system_message: "You are a biomedical research expert. Generate precise and well-structured answers.".to_string(),
            max_tokens: 300,
            temperature: 0.2,
            top_p: 0.8,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            stop: None,
        }
    }

    /// Concise free-text answers.
    pub fn short_form() -> Self {
        Self {
            task: TaskKind::ShortForm,
            system_message: "You are an expert medical AI assistant. Provide concise and accurate answers.".to_string(),
            max_tokens: 50,
            temperature: 0.2,
            top_p: 0.85,
            frequency_penalty: 0.2,
            presence_penalty: 0.0,
            stop: None,
        }
    }

    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::ClosedEnded => Self::closed_ended(),
            TaskKind::LongForm => Self::long_form(),
            TaskKind::ShortForm => Self::short_form(),
        }
    }

    pub fn validate(&self) -> Result<(), RagenError> {
        if self.max_tokens == 0 {
            return Err(RagenError::InvalidProfile("max_tokens must be positive".into()));
        }
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(RagenError::InvalidProfile("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(RagenError::InvalidProfile("top_p must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-field overrides layered on a built-in profile (config or flags).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverrides {
    pub system_message: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub frequency_penalty: Option<f64>,
    pub presence_penalty: Option<f64>,
    pub stop: Option<Vec<String>>,
}

impl ProfileOverrides {
    pub fn apply(&self, mut profile: GenerationProfile) -> GenerationProfile {
        if let Some(v) = &self.system_message {
            profile.system_message = v.clone();
        }
        if let Some(v) = self.max_tokens {
            profile.max_tokens = v;
        }
        if let Some(v) = self.temperature {
            profile.temperature = v;
        }
        if let Some(v) = self.top_p {
            profile.top_p = v;
        }
        if let Some(v) = self.frequency_penalty {
            profile.frequency_penalty = v;
        }
        if let Some(v) = self.presence_penalty {
            profile.presence_penalty = v;
        }
        if let Some(v) = &self.stop {
            profile.stop = Some(v.clone());
        }
        profile
    }
}

/// One retrieved passage resolved to its text.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPassage {
    pub doc_id: DocId,
    pub text: String,
}

/// Resolves a ranked list against a doc-id -> document map, in rank order.
pub fn resolve_contexts<S: Scalar>(
    ranked: &RankedList<S>,
    docs: &BTreeMap<DocId, Document>,
) -> Result<Vec<ContextPassage>, RagenError> {
    ranked
        .entries()
        .iter()
        .map(|entry| {
            let doc = docs
                .get(&entry.doc_id)
                .ok_or_else(|| RagenError::UnknownDoc(entry.doc_id.clone()))?;
            Ok(ContextPassage { doc_id: entry.doc_id.clone(), text: doc.indexable_text() })
        })
        .collect()
}

/// Answer options for closed-ended questions, in presentation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnswerOptions(pub Vec<(String, String)>);

/// A fully assembled prompt. `user` cites each packed passage as
/// `[doc:<id>]`; the passage block never exceeds `context_budget`
/// characters.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub context_budget: usize,
    pub cited_doc_ids: Vec<DocId>,
}

/// Builds the prompt for one question: passages are packed greedily in
/// rank order until the character budget; packing stops at the first
/// passage that does not fit, except that a first passage longer than the
/// whole budget is truncated with a marker. Identical inputs produce
/// byte-identical bundles.
pub fn build_prompt(
    task: TaskKind,
    query: &Query,
    options: Option<&AnswerOptions>,
    contexts: &[ContextPassage],
    budget: usize,
) -> PromptBundle {
    let profile = GenerationProfile::for_task(task);
    let mut user = format!("Question: {}", query.text);
    if let Some(AnswerOptions(options)) = options {
        if !options.is_empty() {
            user.push_str("\n\nOptions:");
            for (label, text) in options {
                user.push_str(&format!("\n{label}. {text}"));
            }
        }
    }
    let (block, cited_doc_ids) = pack_passages(contexts, budget);
    if !block.is_empty() {
        user.push_str("\n\nPassages:\n");
        user.push_str(&block);
    }
    PromptBundle { system: profile.system_message, user, context_budget: budget, cited_doc_ids }
}

fn pack_passages(contexts: &[ContextPassage], budget: usize) -> (String, Vec<DocId>) {
    let mut block = String::new();
    let mut used = 0usize;
    let mut cited = Vec::new();
    for (i, passage) in contexts.iter().enumerate() {
        let rendered = format!("[doc:{}] {}", passage.doc_id, passage.text);
        let rendered_chars = rendered.chars().count();
        let sep = usize::from(!block.is_empty());
        if used + sep + rendered_chars <= budget {
            if sep == 1 {
                block.push('\n');
            }
            block.push_str(&rendered);
            used += sep + rendered_chars;
            cited.push(passage.doc_id.clone());
            continue;
        }
        if i == 0 && budget > 0 {
            let marker_chars = TRUNCATION_MARKER.chars().count();
            let keep = budget.saturating_sub(marker_chars);
            let mut truncated: String = rendered.chars().take(keep).collect();
            truncated.push_str(TRUNCATION_MARKER);
            block = truncated.chars().take(budget).collect();
            cited.push(passage.doc_id.clone());
        }
        break;
    }
    (block, cited)
}

/// A generated response with its operational confidence: the geometric
/// mean of per-token probabilities, `exp(mean(token_logprobs))`.
/// Confidence is present exactly when token log-probabilities are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub text: String,
    pub token_logprobs: Option<Vec<f64>>,
    pub confidence: Option<f64>,
    pub refined: bool,
}

impl GeneratedAnswer {
    /// Normalizes an empty logprob list to absent and rejects positive or
    /// non-finite log-probabilities, so confidence always lies in [0, 1].
    pub fn from_parts(text: String, token_logprobs: Option<Vec<f64>>) -> Result<Self, RagenError> {
        let token_logprobs = token_logprobs.filter(|lp| !lp.is_empty());
        if let Some(lp) = &token_logprobs {
            if lp.iter().any(|v| !v.is_finite() || *v > 0.0) {
                return Err(RagenError::Integrity(
                    "token logprobs must be finite and <= 0".into(),
                ));
            }
        }
        let confidence = token_logprobs
            .as_ref()
            .map(|lp| (lp.iter().sum::<f64>() / lp.len() as f64).exp());
        Ok(Self { text, token_logprobs, confidence, refined: false })
    }
}

/// Calls the backend with the profile's decoding parameters applied
/// verbatim, requesting token log-probabilities when supported.
pub fn generate(
    bundle: &PromptBundle,
    profile: &GenerationProfile,
    backend: &dyn LlmBackend,
) -> Result<GeneratedAnswer, RagenError> {
    profile.validate()?;
    let request = CompletionRequest {
        model: backend.model().to_string(),
        system: bundle.system.clone(),
        user: bundle.user.clone(),
        max_tokens: profile.max_tokens,
        temperature: profile.temperature,
        top_p: profile.top_p,
        frequency_penalty: profile.frequency_penalty,
        presence_penalty: profile.presence_penalty,
        stop: profile.stop.clone(),
        logprobs: backend.supports_logprobs(),
    };
    let response = backend.complete(&request)?;
    if response.text.trim().is_empty() {
        return Err(RagenError::EmptyAnswer);
    }
    GeneratedAnswer::from_parts(response.text, response.token_logprobs)
}

/// Applies the confidence threshold with at most one regeneration.
///
/// Answers without a confidence pass through untouched. A below-threshold
/// answer triggers `regenerate` once; if the retry clears the threshold it
/// is returned, otherwise the higher-confidence candidate wins. Every
/// answer that entered the below-threshold path is flagged `refined`.
pub fn confidence_filter<F>(
    answer: GeneratedAnswer,
    threshold: f64,
    regenerate: Option<F>,
) -> GeneratedAnswer
where
    F: FnOnce() -> Result<GeneratedAnswer, RagenError>,
{
    let confidence = match answer.confidence {
        Some(c) if c < threshold => c,
        _ => return answer,
    };
    let retry = regenerate.and_then(|f| f().ok());
    let mut chosen = match retry {
        Some(retry) if retry.confidence.unwrap_or(0.0) >= confidence => retry,
        _ => answer,
    };
    chosen.refined = true;
    chosen
}

/// Generates answers for a batch of prompts with a bounded number of
/// in-flight requests, applying the confidence filter per answer. Results
/// are returned in input order regardless of completion order.
pub fn generate_batch(
    bundles: &[PromptBundle],
    profile: &GenerationProfile,
    backend: &dyn LlmBackend,
    threshold: f64,
    max_in_flight: usize,
) -> Vec<Result<GeneratedAnswer, RagenError>> {
    let results: Mutex<Vec<Option<Result<GeneratedAnswer, RagenError>>>> =
        Mutex::new((0..bundles.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(bundles.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= bundles.len() {
                    break;
                }
                let result = generate(&bundles[i], profile, backend).map(|ans| {
                    confidence_filter(ans, threshold, Some(|| generate(&bundles[i], profile, backend)))
                });
                results.lock().unwrap()[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}

/// Label alphabets for closed-ended answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSet {
    Abcd,
    YesNo,
    YesNoMaybe,
}

impl std::str::FromStr for OptionSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abcd" => Ok(OptionSet::Abcd),
            "yes_no" => Ok(OptionSet::YesNo),
            "yes_no_maybe" => Ok(OptionSet::YesNoMaybe),
            other => Err(format!("unknown option set {other:?}")),
        }
    }
}

/// Extracts the first option token from the answer text, case-insensitively.
/// Letters accept trailing or surrounding punctuation ("B." -> "B").
/// Canonical labels are upper-case letters and lower-case words.
pub fn parse_closed_answer(answer: &GeneratedAnswer, set: OptionSet) -> Result<String, RagenError> {
    for token in answer.text.split_whitespace() {
        let stripped = token.trim_matches(|c: char| !c.is_alphanumeric());
        let lower = stripped.to_lowercase();
        let label = match set {
            OptionSet::Abcd => matches!(lower.as_str(), "a" | "b" | "c" | "d")
                .then(|| lower.to_uppercase()),
            OptionSet::YesNo => matches!(lower.as_str(), "yes" | "no").then_some(lower),
            OptionSet::YesNoMaybe => {
                matches!(lower.as_str(), "yes" | "no" | "maybe").then_some(lower)
            }
        };
        if let Some(label) = label {
            return Ok(label);
        }
    }
    Err(RagenError::Unparsable(answer.text.clone()))
}

/// One fine-tuning configuration row (metadata only; no training happens
/// here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub task: TaskKind,
    pub train_dataset: String,
    pub train_samples: u64,
    pub training_duration: String,
    pub epochs: u32,
    pub batch_size: u32,
    pub base_model: String,
}

impl FineTuneRecord {
    fn new(
        task: TaskKind,
        train_dataset: &str,
        train_samples: u64,
        training_duration: &str,
        epochs: u32,
        batch_size: u32,
    ) -> Self {
        Self {
            task,
            train_dataset: train_dataset.to_string(),
            train_samples,
            training_duration: training_duration.to_string(),
            epochs,
            batch_size,
            base_model: "gpt-4o".to_string(),
        }
    }

    /// The recorded fine-tuning configurations, by task.
    pub fn reference_configurations() -> Vec<FineTuneRecord> {
        use TaskKind::*;
        vec![
            Self::new(ClosedEnded, "MedQA", 10_178, "3h 25m 33s", 2, 13),
            Self::new(ClosedEnded, "PubMedQA (PQA-L)", 552, "7h 46m 44s", 3, 1),
            Self::new(ClosedEnded, "BioSQA", 5_049, "3h 10m 7s", 3, 2),
            Self::new(LongForm, "PubMedQA (PQA-A)", 196_144, "1d 6h 29m 20s", 1, 64),
            Self::new(LongForm, "MedicationQA", 551, "1h 44m 18s", 3, 1),
            Self::new(LongForm, "LiveQA", 500, "1h 46m 17s", 3, 1),
            Self::new(LongForm, "BioSQA", 5_049, "2h 36m 49s", 3, 10),
            Self::new(LongForm, "Combined Custom Dataset", 6_652, "2h 6m 1s", 3, 13),
            Self::new(ShortForm, "MedQA", 10_178, "1h 49m 44s", 2, 13),
        ]
    }
}

/// One supervised-training example: packed prompt in, target answer out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTunePair {
    pub x: String,
    pub y: String,
}

/// Writes a provider-agnostic fine-tune manifest: one `{x, y}` JSON object
/// per line.
pub fn write_finetune_manifest<W: Write>(mut writer: W, pairs: &[FineTunePair]) -> Result<(), RagenError> {
    for pair in pairs {
        let line = serde_json::to_string(pair)
            .map_err(|e| RagenError::Integrity(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| RagenError::Io {
            path: "<writer>".into(),
            source: e,
        })?;
    }
    Ok(())
}
