//! `ragkit finetune-manifest`: emit a provider-agnostic JSONL of
//! `{x, y}` pairs — packed prompt in, gold answer out.

use std::path::PathBuf;

use ragkit::ragen::{build_prompt, resolve_contexts, FineTunePair, TaskKind};
use ragkit::util::atomic_write;

use crate::config::RunConfig;
use crate::pipeline::{
    configured_mode, document_map, load_documents, load_gold, load_questions, Retriever,
};
use crate::CliError;

pub struct ManifestArgs {
    pub questions: PathBuf,
    pub gold: PathBuf,
    pub task: TaskKind,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,
}

pub fn cmd_finetune_manifest(config: &RunConfig, args: ManifestArgs) -> Result<(), CliError> {
    let questions = load_questions(&args.questions)?;
    let gold = load_gold(&args.gold)?;
    let gold_by_id: std::collections::BTreeMap<&str, &str> =
        gold.iter().map(|g| (g.id.as_str(), g.answer.as_str())).collect();
    let mode = configured_mode(config);
    let retriever = Retriever::open(config, mode)?;
    let doc_map = document_map(load_documents(config)?);
    let k = args.k.unwrap_or(config.generation.contexts_k);
    if k == 0 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let budget = config.generation.context_budget;

    let mut pairs = Vec::new();
    for question in &questions {
        let Some(target) = gold_by_id.get(question.id.as_str()) else {
            eprintln!("warning: no gold answer for question {:?}; skipped", question.id);
            continue;
        };
        let query = question.query()?;
        let ranking = retriever.retrieve(&query, mode, k)?;
        let contexts =
            resolve_contexts(&ranking, &doc_map).map_err(|e| CliError::Runtime(e.into()))?;
        let bundle = build_prompt(
            args.task,
            &query,
            question.answer_options().as_ref(),
            &contexts,
            budget,
        );
        pairs.push(FineTunePair { x: bundle.user, y: target.to_string() });
    }
    if pairs.is_empty() {
        return Err(CliError::Usage("no (question, gold) pairs to emit".into()));
    }
    let mut buf = Vec::new();
    ragkit::ragen::write_finetune_manifest(&mut buf, &pairs)
        .map_err(|e| CliError::Runtime(e.into()))?;
    let output = args.output.unwrap_or_else(|| config.output.dir.join("finetune.jsonl"));
    atomic_write(&output, &buf).map_err(|e| CliError::Runtime(e.into()))?;
    println!("manifest: {} pairs -> {}", pairs.len(), output.display());
    Ok(())
}
