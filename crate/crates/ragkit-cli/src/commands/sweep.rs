//! `ragkit sweep-topk`: run retrieve -> answer -> score for each top-k
//! value and emit a plot-ready CSV.

use std::collections::HashSet;
use std::path::PathBuf;

use ragkit::evalkit::{accuracy, evaluate_generation, GenerationPair};
use ragkit::ragen::{parse_closed_answer, OptionSet, TaskKind};
use ragkit::util::atomic_write;
use ragkit::Score;

use crate::config::RunConfig;
use crate::pipeline::{load_gold, load_questions};
use crate::CliError;

use super::answer::{answer_batch, AnswerResources};

pub struct SweepArgs {
    pub questions: PathBuf,
    pub gold: PathBuf,
    pub task: TaskKind,
    pub k_values: Vec<usize>,
    pub output: Option<PathBuf>,
    pub option_set: Option<OptionSet>,
}

pub fn cmd_sweep_topk(config: &RunConfig, args: SweepArgs) -> Result<(), CliError> {
    if args.k_values.is_empty() {
        return Err(CliError::Usage("pass at least one k via --k-values".into()));
    }
    let mut seen = HashSet::new();
    let mut k_values = Vec::new();
    for k in &args.k_values {
        if *k == 0 {
            return Err(CliError::Usage("k values must be >= 1".into()));
        }
        if seen.insert(*k) {
            k_values.push(*k);
        } else {
            eprintln!("warning: duplicate k value {k} ignored");
        }
    }
    let questions = load_questions(&args.questions)?;
    if questions.is_empty() {
        return Err(CliError::Usage("questions file is empty".into()));
    }
    let gold = load_gold(&args.gold)?;
    let gold_by_id: std::collections::BTreeMap<&str, &str> =
        gold.iter().map(|g| (g.id.as_str(), g.answer.as_str())).collect();
    for question in &questions {
        if !gold_by_id.contains_key(question.id.as_str()) {
            return Err(CliError::Usage(format!("no gold answer for question {:?}", question.id)));
        }
    }
    let resources = AnswerResources::open(config, args.task, None)?;
    let set = args.option_set.unwrap_or(OptionSet::Abcd);

    let mut csv = String::new();
    match args.task {
        TaskKind::ClosedEnded => csv.push_str("k,accuracy\n"),
        TaskKind::LongForm | TaskKind::ShortForm => csv.push_str("k,rouge1,rouge2,rougeL,bleu\n"),
    }
    for &k in &k_values {
        let outcomes = answer_batch(&resources, &questions, k)?;
        match args.task {
            TaskKind::ClosedEnded => {
                let mut predictions = Vec::with_capacity(questions.len());
                let mut gold_labels = Vec::with_capacity(questions.len());
                for outcome in &outcomes {
                    let gold_text = gold_by_id[outcome.id.as_str()];
                    let gold_label = parse_label_or_usage(gold_text, set, &outcome.id)?;
                    gold_labels.push(gold_label);
                    let label = outcome
                        .result
                        .as_ref()
                        .ok()
                        .and_then(|ans| parse_closed_answer(ans, set).ok());
                    predictions.push(label);
                }
                let acc: Score =
                    accuracy(&predictions, &gold_labels).map_err(|e| CliError::Runtime(e.into()))?;
                csv.push_str(&format!("{k},{:.4}\n", acc * 100.0));
            }
            TaskKind::LongForm | TaskKind::ShortForm => {
                let pairs: Vec<GenerationPair> = outcomes
                    .iter()
                    .map(|outcome| GenerationPair {
                        id: outcome.id.clone(),
                        candidate: outcome
                            .result
                            .as_ref()
                            .map(|a| a.text.clone())
                            .unwrap_or_default(),
                        reference: gold_by_id[outcome.id.as_str()].to_string(),
                    })
                    .collect();
                let report =
                    evaluate_generation::<Score>(&pairs).map_err(|e| CliError::Runtime(e.into()))?;
                csv.push_str(&format!(
                    "{k},{:.4},{:.4},{:.4},{:.4}\n",
                    report.mean_rouge1() * 100.0,
                    report.mean_rouge2() * 100.0,
                    report.mean_rouge_l() * 100.0,
                    report.mean_bleu() * 100.0,
                ));
            }
        }
    }
    let output = args.output.unwrap_or_else(|| config.output.dir.join("sweep.csv"));
    atomic_write(&output, csv.as_bytes()).map_err(|e| CliError::Runtime(e.into()))?;
    println!("sweep: {} k values -> {}", k_values.len(), output.display());
    Ok(())
}

fn parse_label_or_usage(text: &str, set: OptionSet, id: &str) -> Result<String, CliError> {
    use ragkit::ragen::GeneratedAnswer;
    let answer = GeneratedAnswer {
        text: text.to_string(),
        token_logprobs: None,
        confidence: None,
        refined: false,
    };
    parse_closed_answer(&answer, set).map_err(|_| {
        CliError::Usage(format!("gold answer for {id:?} has no parsable label: {text:?}"))
    })
}
