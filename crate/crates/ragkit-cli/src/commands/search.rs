//! `ragkit search`: retrieve documents and write a TREC run file.

use std::path::{Path, PathBuf};

use ragkit::corpus::{load_queries, Query};
use ragkit::trec::run_to_bytes;
use ragkit::util::atomic_write;
use ragkit::Ranking;

use crate::config::RunConfig;
use crate::pipeline::{RetrievalMode, Retriever};
use crate::CliError;

pub struct SearchArgs {
    pub mode: RetrievalMode,
    pub query: Option<String>,
    pub queries: Option<PathBuf>,
    pub k: Option<usize>,
    pub output: Option<PathBuf>,
    pub tag: Option<String>,
}

pub fn cmd_search(config: &RunConfig, args: SearchArgs) -> Result<(), CliError> {
    let queries: Vec<Query> = match (&args.query, &args.queries) {
        (Some(text), None) => {
            vec![Query::new("q1", text.clone()).map_err(|e| CliError::Usage(e.to_string()))?]
        }
        (None, Some(path)) => {
            RunConfig::require_file(path, "queries")?;
            load_queries(path).map_err(|e| CliError::Runtime(e.into()))?
        }
        (None, None) => {
            // fall back to the configured query file
            let path = config
                .corpus()?
                .queries
                .clone()
                .ok_or_else(|| CliError::Usage("pass --query or --queries (or set corpus.queries)".into()))?;
            RunConfig::require_file(&path, "corpus.queries")?;
            load_queries(&path).map_err(|e| CliError::Runtime(e.into()))?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--query and --queries are mutually exclusive".into()));
        }
    };
    if queries.is_empty() {
        return Err(CliError::Usage("no queries to run".into()));
    }
    let k = args.k.unwrap_or(config.search.k);
    if k == 0 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let retriever = Retriever::open(config, args.mode)?;
    let mut runs: Vec<Ranking> = Vec::with_capacity(queries.len());
    for query in &queries {
        runs.push(retriever.retrieve(query, args.mode, k)?);
    }
    let tag = args.tag.unwrap_or_else(|| args.mode.tag().to_string());
    let output = args
        .output
        .unwrap_or_else(|| config.output.dir.join("run.txt"));
    write_run_file(&output, &runs, &tag)?;
    let lines: usize = runs.iter().map(|r| r.len()).sum();
    println!("run: {} queries, {} lines -> {}", runs.len(), lines, output.display());
    Ok(())
}

pub fn write_run_file(path: &Path, runs: &[Ranking], tag: &str) -> Result<(), CliError> {
    atomic_write(path, &run_to_bytes(runs, tag)).map_err(|e| CliError::Runtime(e.into()))
}
