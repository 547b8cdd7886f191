//! `ragkit eval-qa`: score answers against gold — accuracy for
//! closed-ended tasks, ROUGE/BLEU for free-text tasks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ragkit::evalkit::{accuracy, evaluate_generation, load_generation_pairs, GenerationPair};
use ragkit::ragen::{parse_closed_answer, GeneratedAnswer, OptionSet, TaskKind};
use ragkit::util::atomic_write;
use ragkit::Score;

use crate::config::RunConfig;
use crate::pipeline::load_gold;
use crate::CliError;

pub struct EvalQaArgs {
    pub task: TaskKind,
    pub answers: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub option_set: Option<OptionSet>,
    pub json: Option<PathBuf>,
}

/// One line of an answers file as written by `ragkit answer`.
#[derive(Debug, Deserialize)]
struct AnswerRecord {
    id: String,
    text: String,
}

fn load_answers(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    RunConfig::require_file(path, "answers")?;
    let file = std::fs::File::open(path).map_err(|e| CliError::Runtime(e.into()))?;
    let mut map = BTreeMap::new();
    for (idx, line) in std::io::BufRead::lines(std::io::BufReader::new(file)).enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.into()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnswerRecord = serde_json::from_str(&line).map_err(|e| {
            CliError::Usage(format!("{}:{}: malformed JSON: {e}", path.display(), idx + 1))
        })?;
        map.insert(record.id, record.text);
    }
    Ok(map)
}

/// Canonical label from free text (same parser the pipeline uses).
fn parse_label(text: &str, set: OptionSet) -> Option<String> {
    let answer = GeneratedAnswer { text: text.to_string(), token_logprobs: None, confidence: None, refined: false };
    parse_closed_answer(&answer, set).ok()
}

pub fn cmd_eval_qa(args: EvalQaArgs) -> Result<(), CliError> {
    match args.task {
        TaskKind::ClosedEnded => eval_closed(args),
        TaskKind::LongForm | TaskKind::ShortForm => eval_freeform(args),
    }
}

fn eval_closed(args: EvalQaArgs) -> Result<(), CliError> {
    let (answers_path, gold_path) = match (&args.answers, &args.gold) {
        (Some(a), Some(g)) => (a, g),
        _ => return Err(CliError::Usage("closed-ended eval needs --answers and --gold".into())),
    };
    let set = args.option_set.unwrap_or(OptionSet::Abcd);
    let answers = load_answers(answers_path)?;
    let gold = load_gold(gold_path)?;
    if gold.is_empty() {
        return Err(CliError::Usage("gold file is empty".into()));
    }
    let mut predictions: Vec<Option<String>> = Vec::with_capacity(gold.len());
    let mut gold_labels: Vec<String> = Vec::with_capacity(gold.len());
    let mut missing: Vec<String> = Vec::new();
    let mut unparsable: Vec<String> = Vec::new();
    for record in &gold {
        let gold_label = parse_label(&record.answer, set).ok_or_else(|| {
            CliError::Usage(format!("gold answer for {:?} has no parsable label: {:?}", record.id, record.answer))
        })?;
        gold_labels.push(gold_label);
        match answers.get(&record.id) {
            None => {
                missing.push(record.id.clone());
                predictions.push(None);
            }
            Some(text) => {
                let label = parse_label(text, set);
                if label.is_none() {
                    unparsable.push(record.id.clone());
                }
                predictions.push(label);
            }
        }
    }
    for id in &missing {
        eprintln!("warning: no answer for gold id {id:?}; scored as wrong");
    }
    for id in &unparsable {
        eprintln!("warning: answer for {id:?} has no parsable label; scored as wrong");
    }
    let acc: Score = accuracy(&predictions, &gold_labels).map_err(|e| CliError::Runtime(e.into()))?;
    let correct = predictions
        .iter()
        .zip(&gold_labels)
        .filter(|(p, g)| p.as_deref() == Some(g.as_str()))
        .count();
    println!("accuracy: {:.2} ({correct}/{} correct)", acc * 100.0, gold.len());
    if let Some(path) = &args.json {
        let json = serde_json::json!({
            "task": "closed_ended",
            "accuracy": acc * 100.0,
            "correct": correct,
            "total": gold.len(),
            "missing": missing,
            "unparsable": unparsable,
        });
        let bytes = serde_json::to_vec_pretty(&json).map_err(|e| CliError::Runtime(e.into()))?;
        atomic_write(path, &bytes).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}

fn eval_freeform(args: EvalQaArgs) -> Result<(), CliError> {
    let pairs: Vec<GenerationPair> = match (&args.pairs, &args.answers, &args.gold) {
        (Some(path), None, None) => {
            RunConfig::require_file(path, "pairs")?;
            load_generation_pairs(path).map_err(|e| CliError::Runtime(e.into()))?
        }
        (None, Some(answers_path), Some(gold_path)) => {
            let answers = load_answers(answers_path)?;
            let gold = load_gold(gold_path)?;
            let mut missing = Vec::new();
            let pairs: Vec<GenerationPair> = gold
                .iter()
                .map(|record| {
                    let candidate = match answers.get(&record.id) {
                        Some(text) => text.clone(),
                        None => {
                            missing.push(record.id.clone());
                            String::new()
                        }
                    };
                    GenerationPair {
                        id: record.id.clone(),
                        candidate,
                        reference: record.answer.clone(),
                    }
                })
                .collect();
            for id in &missing {
                eprintln!("warning: no answer for gold id {id:?}; scored as empty candidate");
            }
            pairs
        }
        _ => {
            return Err(CliError::Usage(
                "free-form eval needs either --pairs or both --answers and --gold".into(),
            ))
        }
    };
    if pairs.is_empty() {
        return Err(CliError::Usage("nothing to evaluate".into()));
    }
    let report = evaluate_generation::<Score>(&pairs).map_err(|e| CliError::Runtime(e.into()))?;
    print!("{}", report.render_table());
    if let Some(path) = &args.json {
        let bytes = serde_json::to_vec_pretty(&report.to_json())
            .map_err(|e| CliError::Runtime(e.into()))?;
        atomic_write(path, &bytes).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}
