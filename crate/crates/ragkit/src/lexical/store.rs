//! Lexical index persistence: one self-describing JSON file with a
//! versioned header. Round-trip fidelity is contractual and checked by
//! re-validating invariants on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InvertedIndex, LexicalError};
use crate::util::atomic_write;

pub const INDEX_FORMAT: &str = "ragkit-lexical-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    index: InvertedIndex,
}

fn store_err(path: &Path, msg: impl Into<String>) -> LexicalError {
    LexicalError::Store { path: path.display().to_string(), msg: msg.into() }
}

/// Writes the index atomically as versioned JSON.
pub fn save_index(path: &Path, index: &InvertedIndex) -> Result<(), LexicalError> {
    let file = IndexFile {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        index: index.clone(),
    };
    let bytes = serde_json::to_vec(&file).map_err(|e| store_err(path, e.to_string()))?;
    atomic_write(path, &bytes).map_err(|e| LexicalError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads and validates a previously saved index.
pub fn load_index(path: &Path) -> Result<InvertedIndex, LexicalError> {
    let bytes = fs::read(path).map_err(|e| LexicalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: IndexFile =
        serde_json::from_slice(&bytes).map_err(|e| store_err(path, e.to_string()))?;
    if file.format != INDEX_FORMAT {
        return Err(store_err(path, format!("unexpected format {:?}", file.format)));
    }
    if file.version != INDEX_VERSION {
        return Err(store_err(
            path,
            format!("unsupported version {} (expected {INDEX_VERSION})", file.version),
        ));
    }
    file.index.validate().map_err(|e| store_err(path, e.to_string()))?;
    Ok(file.index)
}
