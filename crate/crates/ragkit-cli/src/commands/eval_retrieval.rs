//! `ragkit eval-retrieval`: score a run file against qrels and emit the
//! metrics table plus machine-readable JSON.

use std::path::PathBuf;

use ragkit::corpus::load_qrels;
use ragkit::evalkit::evaluate_run;
use ragkit::trec::read_run;
use ragkit::util::atomic_write;
use ragkit::Score;

use crate::config::RunConfig;
use crate::CliError;

pub struct EvalRetrievalArgs {
    pub run: PathBuf,
    pub qrels: Option<PathBuf>,
    pub k: Option<usize>,
    pub json: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

pub fn cmd_eval_retrieval(config: &RunConfig, args: EvalRetrievalArgs) -> Result<(), CliError> {
    let qrels_path = match args.qrels {
        Some(path) => path,
        None => config
            .corpus
            .as_ref()
            .and_then(|c| c.qrels.clone())
            .ok_or_else(|| CliError::Usage("pass --qrels or set corpus.qrels in the config".into()))?,
    };
    RunConfig::require_file(&args.run, "run")?;
    RunConfig::require_file(&qrels_path, "qrels")?;
    let k = args.k.unwrap_or(config.eval.k);
    if k == 0 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let runs = read_run::<Score>(&args.run).map_err(|e| CliError::Runtime(e.into()))?;
    let qrels = load_qrels(&qrels_path).map_err(|e| CliError::Runtime(e.into()))?;
    let report = evaluate_run(&runs, &qrels, k).map_err(|e| CliError::Runtime(e.into()))?;
    for query_id in &report.unknown_queries {
        eprintln!("warning: query {query_id:?} has no qrels entry; excluded from the report");
    }
    let table = report.render_table();
    print!("{table}");
    if let Some(path) = &args.table {
        atomic_write(path, table.as_bytes()).map_err(|e| CliError::Runtime(e.into()))?;
    }
    if let Some(path) = &args.json {
        let json = serde_json::to_vec_pretty(&report.to_json())
            .map_err(|e| CliError::Runtime(e.into()))?;
        atomic_write(path, &json).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}
