//! TREC run format: `qid Q0 docid rank score tag`, one line per entry.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::rank::{RankError, RankedEntry, RankedList};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TrecError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("run for query {query_id:?} is malformed: {source}")]
    Malformed {
        query_id: String,
        #[source]
        source: RankError,
    },
}

/// Writes ranked lists as run lines. Scores are fixed to six decimal
/// places so identical runs serialize to identical bytes.
pub fn write_run<S: Scalar, W: Write>(
    mut writer: W,
    lists: &[RankedList<S>],
    tag: &str,
) -> std::io::Result<()> {
    for list in lists {
        for entry in list.entries() {
            writeln!(
                writer,
                "{} Q0 {} {} {:.6} {}",
                list.query_id,
                entry.doc_id,
                entry.rank,
                entry.score.to_f64().unwrap_or(f64::NAN),
                tag
            )?;
        }
    }
    Ok(())
}

/// Serializes ranked lists to run-file bytes.
pub fn run_to_bytes<S: Scalar>(lists: &[RankedList<S>], tag: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    write_run(&mut buf, lists, tag).expect("writing to a Vec cannot fail");
    buf
}

/// Reads a run file, grouping lines by query id (first-seen order).
/// Entries are ordered by their rank column, re-numbered contiguously,
/// and validated against the ranked-list invariants.
pub fn read_run<S: Scalar>(path: &Path) -> Result<Vec<RankedList<S>>, TrecError> {
    let file = File::open(path).map_err(|e| TrecError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::HashMap<String, Vec<(u32, RankedEntry<S>)>> =
        std::collections::HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TrecError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| TrecError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(parse_err(format!("expected 6 columns, got {}", cols.len())));
        }
        let rank: u32 = cols[3]
            .parse()
            .map_err(|_| parse_err(format!("bad rank {:?}", cols[3])))?;
        let score_f64: f64 = cols[4]
            .parse()
            .map_err(|_| parse_err(format!("bad score {:?}", cols[4])))?;
        let score = S::from_f64(score_f64)
            .ok_or_else(|| parse_err(format!("unrepresentable score {score_f64}")))?;
        let query_id = cols[0].to_string();
        if !grouped.contains_key(&query_id) {
            order.push(query_id.clone());
        }
        grouped.entry(query_id).or_default().push((
            rank,
            RankedEntry { doc_id: cols[2].to_string(), score, rank },
        ));
    }
    let mut lists = Vec::with_capacity(order.len());
    for query_id in order {
        let mut entries = grouped.remove(&query_id).unwrap();
        entries.sort_by_key(|(rank, _)| *rank);
        let entries: Vec<RankedEntry<S>> = entries
            .into_iter()
            .enumerate()
            .map(|(i, (_, mut e))| {
                e.rank = i as u32 + 1;
                e
            })
            .collect();
        let list = RankedList::from_ranked(&query_id, entries)
            .map_err(|source| TrecError::Malformed { query_id, source })?;
        lists.push(list);
    }
    Ok(lists)
}
