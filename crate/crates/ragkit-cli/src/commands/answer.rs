//! `ragkit answer`: retrieve contexts, build prompts, call the backend,
//! and write answers JSONL. Failed questions are reported and flushed
//! around; any failure makes the run exit partial.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use ragkit::corpus::{DocId, Document};
use ragkit::ragen::{
    build_prompt, generate_batch, resolve_contexts, GenerationProfile, GeneratedAnswer,
    LlmBackend, PromptBundle, RagenError, TaskKind,
};
use ragkit::util::atomic_write;

use crate::config::RunConfig;
use crate::pipeline::{
    build_backend, configured_mode, document_map, load_documents, load_questions,
    QuestionRecord, RetrievalMode, Retriever,
};
use crate::CliError;

pub struct AnswerArgs {
    pub questions: PathBuf,
    pub task: TaskKind,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,
    pub threshold: Option<f64>,
}

/// Everything the answer flow needs, loaded once.
pub struct AnswerResources {
    pub doc_map: BTreeMap<DocId, Document>,
    pub retriever: Retriever,
    pub mode: RetrievalMode,
    pub backend: Box<dyn LlmBackend>,
    pub profile: GenerationProfile,
    pub budget: usize,
    pub threshold: f64,
    pub max_in_flight: usize,
}

impl AnswerResources {
    pub fn open(config: &RunConfig, task: TaskKind, threshold_override: Option<f64>) -> Result<Self, CliError> {
        let mode = configured_mode(config);
        let retriever = Retriever::open(config, mode)?;
        let doc_map = document_map(load_documents(config)?);
        let backend = build_backend(config)?;
        let mut profile = GenerationProfile::for_task(task);
        if let Some(overrides) = &config.generation.overrides {
            profile = overrides.apply(profile);
        }
        profile.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self {
            doc_map,
            retriever,
            mode,
            backend,
            profile,
            budget: config.generation.context_budget,
            threshold: threshold_override.unwrap_or(config.generation.confidence_threshold),
            max_in_flight: config.backend_config()?.max_in_flight,
        })
    }

    pub fn build_bundle(&self, question: &QuestionRecord, k: usize) -> Result<PromptBundle, CliError> {
        let query = question.query()?;
        let ranking = self.retriever.retrieve(&query, self.mode, k)?;
        let contexts = resolve_contexts(&ranking, &self.doc_map)
            .map_err(|e| CliError::Runtime(e.into()))?;
        Ok(build_prompt(
            self.profile.task,
            &query,
            question.answer_options().as_ref(),
            &contexts,
            self.budget,
        ))
    }
}

pub struct AnswerOutcome {
    pub id: String,
    pub cited_doc_ids: Vec<DocId>,
    pub result: Result<GeneratedAnswer, RagenError>,
}

/// Retrieves, prompts, and generates for every question, preserving
/// question order in the output.
pub fn answer_batch(
    resources: &AnswerResources,
    questions: &[QuestionRecord],
    k: usize,
) -> Result<Vec<AnswerOutcome>, CliError> {
    let mut bundles = Vec::with_capacity(questions.len());
    for question in questions {
        bundles.push(resources.build_bundle(question, k)?);
    }
    let results = generate_batch(
        &bundles,
        &resources.profile,
        resources.backend.as_ref(),
        resources.threshold,
        resources.max_in_flight,
    );
    Ok(questions
        .iter()
        .zip(bundles)
        .zip(results)
        .map(|((question, bundle), result)| AnswerOutcome {
            id: question.id.clone(),
            cited_doc_ids: bundle.cited_doc_ids,
            result,
        })
        .collect())
}

#[derive(Serialize)]
struct AnswerLine<'a> {
    id: &'a str,
    text: &'a str,
    confidence: Option<f64>,
    refined: bool,
    cited_doc_ids: &'a [DocId],
}

pub fn cmd_answer(config: &RunConfig, args: AnswerArgs) -> Result<(), CliError> {
    let questions = load_questions(&args.questions)?;
    if questions.is_empty() {
        return Err(CliError::Usage("questions file is empty".into()));
    }
    let resources = AnswerResources::open(config, args.task, args.threshold)?;
    let k = args.k.unwrap_or(config.generation.contexts_k);
    if k == 0 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let outcomes = answer_batch(&resources, &questions, k)?;

    let mut lines = Vec::new();
    let mut failed: Vec<(String, String)> = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok(answer) => {
                let line = AnswerLine {
                    id: &outcome.id,
                    text: &answer.text,
                    confidence: answer.confidence,
                    refined: answer.refined,
                    cited_doc_ids: &outcome.cited_doc_ids,
                };
                lines.push(serde_json::to_string(&line).map_err(|e| CliError::Runtime(e.into()))?);
            }
            Err(e) => failed.push((outcome.id.clone(), e.to_string())),
        }
    }
    let output = args
        .output
        .unwrap_or_else(|| config.output.dir.join("answers.jsonl"));
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    atomic_write(&output, body.as_bytes()).map_err(|e| CliError::Runtime(e.into()))?;
    println!("answers: {} of {} -> {}", lines.len(), questions.len(), output.display());
    if !failed.is_empty() {
        for (id, reason) in &failed {
            eprintln!("failed: {id}: {reason}");
        }
        return Err(CliError::Partial(format!(
            "{} of {} questions failed; partial answers written to {}",
            failed.len(),
            questions.len(),
            output.display()
        )));
    }
    Ok(())
}
