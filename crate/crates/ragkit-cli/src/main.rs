//! Command-line surface for the retrieval + QA pipeline: indexing,
//! search, retrieval evaluation, answer generation, QA evaluation, the
//! top-k sweep, and fine-tune manifest export.
//!
//! Exit codes: 0 success, 1 partial or runtime failure, 2 usage/config
//! error.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use ragkit::ragen::{OptionSet, TaskKind};

use commands::*;
use config::RunConfig;
use pipeline::RetrievalMode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config, missing input paths, refused overwrites.
    Usage(String),
    /// Some work finished; some failed.
    Partial(String),
    /// Hard failure mid-run.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

#[derive(Parser)]
#[command(name = "ragkit", version, about = "Hybrid retrieval, answer generation, and IR/QA evaluation")]
struct Cli {
    /// Run configuration file (TOML with ${VAR} interpolation)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the configured lexical/vector indexes
    Index {
        /// Overwrite existing index files
        #[arg(long)]
        force: bool,
    },
    /// Retrieve documents and write a TREC run file
    Search {
        /// lexical, semantic, or hybrid
        #[arg(long, value_parser = RetrievalMode::from_str)]
        mode: RetrievalMode,
        /// Ad-hoc query text (run as query id "q1")
        #[arg(long)]
        query: Option<String>,
        /// Queries file (JSONL with _id and text)
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Results per query
        #[arg(short, long)]
        k: Option<usize>,
        /// Run file destination (default <output.dir>/run.txt)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Run tag column (default: the mode name)
        #[arg(long)]
        tag: Option<String>,
    },
    /// Score a run file against qrels
    EvalRetrieval {
        #[arg(long)]
        run: PathBuf,
        /// Qrels TSV (default: corpus.qrels from the config)
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Metric cutoff
        #[arg(short, long)]
        k: Option<usize>,
        /// Write the machine-readable report here
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the text table here (it always prints to stdout)
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Generate answers for a questions file
    Answer {
        #[arg(long)]
        questions: PathBuf,
        /// closed_ended, long_form, or short_form
        #[arg(long, value_parser = TaskKind::from_str)]
        task: TaskKind,
        /// Answers destination (default <output.dir>/answers.jsonl)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Contexts per question (default generation.contexts_k)
        #[arg(short, long)]
        k: Option<usize>,
        /// Confidence threshold override
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score answers against gold labels or references
    EvalQa {
        /// closed_ended, long_form, or short_form
        #[arg(long, value_parser = TaskKind::from_str)]
        task: TaskKind,
        /// Answers JSONL from `ragkit answer`
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Gold JSONL (_id, answer)
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Pre-joined {id, candidate, reference} JSONL (free-form tasks)
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// abcd, yes_no, or yes_no_maybe (closed-ended; default abcd)
        #[arg(long, value_parser = OptionSet::from_str)]
        option_set: Option<OptionSet>,
        /// Write the machine-readable report here
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run retrieve -> answer -> score per top-k value; emit CSV
    SweepTopk {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// closed_ended, long_form, or short_form
        #[arg(long, value_parser = TaskKind::from_str)]
        task: TaskKind,
        /// Comma-separated top-k values, e.g. 1,2,4,8
        #[arg(long, value_delimiter = ',')]
        k_values: Vec<usize>,
        /// CSV destination (default <output.dir>/sweep.csv)
        #[arg(long)]
        output: Option<PathBuf>,
        /// abcd, yes_no, or yes_no_maybe (closed-ended; default abcd)
        #[arg(long, value_parser = OptionSet::from_str)]
        option_set: Option<OptionSet>,
    },
    /// Emit a fine-tune manifest: {x: packed prompt, y: gold answer}
    FinetuneManifest {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// closed_ended, long_form, or short_form
        #[arg(long, value_parser = TaskKind::from_str)]
        task: TaskKind,
        /// Manifest destination (default <output.dir>/finetune.jsonl)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Contexts per question (default generation.contexts_k)
        #[arg(short, long)]
        k: Option<usize>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(path) => RunConfig::load(path),
        None => Err(CliError::Usage("this command needs --config".into())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Index { force } => cmd_index(&load_config(&cli.config)?, force),
        Command::Search { mode, query, queries, k, output, tag } => cmd_search(
            &load_config(&cli.config)?,
            commands::SearchArgs { mode, query, queries, k, output, tag },
        ),
        Command::EvalRetrieval { run, qrels, k, json, table } => {
            // the qrels default comes from the config when present
            let config = match &cli.config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            cmd_eval_retrieval(&config, commands::EvalRetrievalArgs { run, qrels, k, json, table })
        }
        Command::Answer { questions, task, output, k, threshold } => cmd_answer(
            &load_config(&cli.config)?,
            commands::AnswerArgs { questions, task, output, k, threshold },
        ),
        Command::EvalQa { task, answers, gold, pairs, option_set, json } => {
            cmd_eval_qa(commands::EvalQaArgs { task, answers, gold, pairs, option_set, json })
        }
        Command::SweepTopk { questions, gold, task, k_values, output, option_set } => {
            cmd_sweep_topk(
                &load_config(&cli.config)?,
                commands::SweepArgs { questions, gold, task, k_values, output, option_set },
            )
        }
        Command::FinetuneManifest { questions, gold, task, output, k } => cmd_finetune_manifest(
            &load_config(&cli.config)?,
            commands::ManifestArgs { questions, gold, task, output, k },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
