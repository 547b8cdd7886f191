//! Corpus, query, and qrels file loaders (BEIR-style layouts, UTF-8).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use super::{CorpusError, Document, Query, RelevanceJudgments};

/// Supported corpus file layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line with `_id`, `title`, `text` fields.
    BeirJsonl,
}

#[derive(Deserialize)]
struct RawDoc {
    #[serde(rename = "_id")]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct RawQuery {
    #[serde(rename = "_id")]
    id: String,
    #[serde(default)]
    text: String,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

/// Loads all documents in file order. Blank lines are skipped; duplicate
/// `_id` values are an integrity error.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let CorpusFormat::BeirJsonl = format;
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDoc = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, idx + 1, format!("malformed JSON: {e}")))?;
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::Integrity(format!(
                "duplicate document id {:?} at {}:{}",
                raw.id,
                path.display(),
                idx + 1
            )));
        }
        let title = if raw.title.is_empty() { None } else { Some(raw.title) };
        docs.push(Document::new(raw.id, title, raw.text)?);
    }
    Ok(docs)
}

/// Writes documents back out in BEIR JSONL form (`None` title becomes "").
///
/// Loading the result reproduces the original `(id, title, body)` triples.
pub fn save_corpus<W: Write>(mut writer: W, docs: &[Document]) -> Result<(), CorpusError> {
    for doc in docs {
        let line = serde_json::json!({
            "_id": doc.id,
            "title": doc.title.as_deref().unwrap_or(""),
            "text": doc.body,
        });
        writeln!(writer, "{line}").map_err(|e| CorpusError::Io {
            path: "<writer>".into(),
            source: e,
        })?;
    }
    Ok(())
}

/// Loads a BEIR `queries.jsonl` file (`_id`, `text`).
pub fn load_queries(path: &Path) -> Result<Vec<Query>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuery = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, idx + 1, format!("malformed JSON: {e}")))?;
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::Integrity(format!(
                "duplicate query id {:?} at {}:{}",
                raw.id,
                path.display(),
                idx + 1
            )));
        }
        queries.push(Query::new(raw.id, raw.text)?);
    }
    Ok(queries)
}

/// Loads relevance judgments from TSV.
///
/// Accepts the BEIR 3-column layout (`query-id  corpus-id  score`) and the
/// TREC 4-column layout (`qid  Q0  docid  score`), auto-detected per line
/// by column count; columns may be separated by any whitespace. A leading
/// header row is detected by its non-integer grade column and skipped.
pub fn load_qrels(path: &Path) -> Result<RelevanceJudgments, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut qrels = RelevanceJudgments::new();
    let mut first_data_line = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (query_id, doc_id, grade_col) = match cols.len() {
            3 => (cols[0], cols[1], cols[2]),
            4 => (cols[0], cols[2], cols[3]),
            n => return Err(parse_err(path, idx + 1, format!("expected 3 or 4 columns, got {n}"))),
        };
        let grade: i64 = match grade_col.parse() {
            Ok(g) => g,
            Err(_) if first_data_line => {
                // header row
                first_data_line = false;
                continue;
            }
            Err(_) => {
                return Err(parse_err(path, idx + 1, format!("non-integer grade {grade_col:?}")));
            }
        };
        first_data_line = false;
        if grade < 0 {
            return Err(CorpusError::Integrity(format!(
                "negative grade {grade} for ({query_id}, {doc_id}) at {}:{}",
                path.display(),
                idx + 1
            )));
        }
        qrels.insert(query_id, doc_id, grade as u32)?;
    }
    Ok(qrels)
}
