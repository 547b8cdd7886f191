//! Vector index persistence: a versioned little-endian binary file of
//! (doc id, float32 values) records.
//!
//! Layout: magic `RKVX`, version u32, dim u32, entry count u64, then per
//! entry a u32 id length, the UTF-8 id bytes, and `dim` f32 values.

use std::fs;
use std::path::Path;

use super::{Embedding, SemanticError, VectorIndex};
use crate::scalar::Scalar;
use crate::util::atomic_write;

const MAGIC: &[u8; 4] = b"RKVX";
pub const VECTOR_INDEX_VERSION: u32 = 1;

fn store_err(path: &Path, msg: impl Into<String>) -> SemanticError {
    SemanticError::Store { path: path.display().to_string(), msg: msg.into() }
}

/// Saves the index atomically. Values are stored as f32 regardless of the
/// in-memory scalar.
pub fn save_vector_index<S: Scalar>(path: &Path, index: &VectorIndex<S>) -> Result<(), SemanticError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VECTOR_INDEX_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for (doc_id, emb) in index.entries() {
        let id_bytes = doc_id.as_bytes();
        bytes.extend_from_slice(&(id_bytes.len() as u32).to_le_bytes());
        bytes.extend_from_slice(id_bytes);
        for &v in emb.values() {
            let f = v.to_f32().ok_or_else(|| store_err(path, "value not representable as f32"))?;
            bytes.extend_from_slice(&f.to_le_bytes());
        }
    }
    atomic_write(path, &bytes)
        .map_err(|e| SemanticError::Io { path: path.display().to_string(), source: e })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Loads a previously saved index, re-validating every structural
/// invariant (dimension, unique sorted ids, finite values, positive norms).
pub fn load_vector_index<S: Scalar>(path: &Path) -> Result<VectorIndex<S>, SemanticError> {
    let bytes = fs::read(path)
        .map_err(|e| SemanticError::Io { path: path.display().to_string(), source: e })?;
    let mut reader = Reader { bytes: &bytes, pos: 0 };
    let truncated = || store_err(path, "truncated file");
    let magic = reader.take(4).ok_or_else(truncated)?;
    if magic != MAGIC {
        return Err(store_err(path, "bad magic; not a vector index file"));
    }
    let version = reader.u32().ok_or_else(truncated)?;
    if version != VECTOR_INDEX_VERSION {
        return Err(store_err(
            path,
            format!("unsupported version {version} (expected {VECTOR_INDEX_VERSION})"),
        ));
    }
    let dim = reader.u32().ok_or_else(truncated)? as usize;
    let count = reader.u64().ok_or_else(truncated)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = reader.u32().ok_or_else(truncated)? as usize;
        let id_bytes = reader.take(id_len).ok_or_else(truncated)?;
        let doc_id = std::str::from_utf8(id_bytes)
            .map_err(|_| store_err(path, "doc id is not valid UTF-8"))?
            .to_string();
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let f = reader.f32().ok_or_else(truncated)?;
            values.push(S::from_f32(f).ok_or_else(|| store_err(path, "unrepresentable value"))?);
        }
        let emb = Embedding::new(values)
            .map_err(|e| store_err(path, format!("doc {doc_id:?}: {e}")))?;
        entries.push((doc_id, emb));
    }
    if reader.pos != bytes.len() {
        return Err(store_err(path, "trailing bytes after last entry"));
    }
    VectorIndex::from_entries(dim, entries)
}
