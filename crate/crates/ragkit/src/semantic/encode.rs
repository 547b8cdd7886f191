//! Text encoders behind a single handle: a deterministic local test
//! encoder and a batched remote JSON-over-HTTP client with retries and an
//! on-disk embedding cache.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Embedding, SemanticError};
use crate::scalar::Scalar;

/// Dimension of the built-in test encoder.
pub const DEFAULT_ENCODER_DIM: usize = 256;

/// An encoder: deterministic by contract — equal input text yields equal
/// vectors.
#[derive(Debug)]
// a process holds a handful of long-lived handles; boxing the large
// remote variant buys nothing
#[allow(clippy::large_enum_variant)]
pub enum EncoderHandle {
    /// Dependency-free local encoder for tests and offline runs.
    LocalTest(TrigramEncoder),
    /// Remote embedding service.
    Remote(RemoteEncoder),
}

impl EncoderHandle {
    /// Local test encoder at the default dimension (256).
    pub fn local_test() -> Self {
        Self::LocalTest(TrigramEncoder::new(DEFAULT_ENCODER_DIM))
    }

    pub fn local_test_with_dim(dim: usize) -> Self {
        Self::LocalTest(TrigramEncoder::new(dim))
    }

    pub fn remote(config: RemoteEncoderConfig) -> Result<Self, SemanticError> {
        Ok(Self::Remote(RemoteEncoder::new(config)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::LocalTest(enc) => enc.dim(),
            Self::Remote(enc) => enc.config.dim,
        }
    }

    /// Encodes one text. The text must be non-empty after trimming.
    pub fn encode<S: Scalar>(&self, text: &str) -> Result<Embedding<S>, SemanticError> {
        if text.trim().is_empty() {
            return Err(SemanticError::EmptyText);
        }
        match self {
            Self::LocalTest(enc) => enc.encode(text),
            Self::Remote(enc) => {
                let mut out = enc.encode_batch::<S>(std::slice::from_ref(&text.to_string()))?;
                Ok(out.pop().expect("one vector per input"))
            }
        }
    }

    /// Encodes many texts; the result is positionally aligned with the
    /// input and independent of batch size. Per-item failures are reported
    /// as `BatchItem` carrying the input position.
    pub fn encode_batch<S: Scalar>(&self, texts: &[String]) -> Result<Vec<Embedding<S>>, SemanticError> {
        for (i, text) in texts.iter().enumerate() {
            if text.trim().is_empty() {
                return Err(SemanticError::BatchItem {
                    item: i,
                    source: Box::new(SemanticError::EmptyText),
                });
            }
        }
        match self {
            Self::LocalTest(enc) => texts.iter().map(|t| enc.encode(t)).collect(),
            Self::Remote(enc) => enc.encode_batch(texts),
        }
    }
}

/// Hashed bag of character trigrams, L2-normalized.
///
/// The text is lowercased and its character sequence (spaces included) is
/// cut into length-3 windows; texts of one or two characters use the whole
/// text as a single gram. Each gram is hashed with FNV-1a 64 over its
/// UTF-8 bytes and counted in `hash % dim` buckets. Near-duplicate strings
/// therefore map to nearby vectors, and equal strings to equal vectors.
#[derive(Debug, Clone)]
pub struct TrigramEncoder {
    dim: usize,
}

impl TrigramEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn encode<S: Scalar>(&self, text: &str) -> Result<Embedding<S>, SemanticError> {
        let lower = text.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut counts = vec![0u32; self.dim];
        let mut gram = |s: &str| {
            let bucket = (fnv1a_64(s.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += 1;
        };
        if chars.len() < 3 {
            if !chars.is_empty() {
                gram(&lower);
            }
        } else {
            let mut buf = String::new();
            for window in chars.windows(3) {
                buf.clear();
                buf.extend(window);
                gram(&buf);
            }
        }
        let norm = (counts.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>()).sqrt();
        if norm == 0.0 {
            return Err(SemanticError::ZeroNorm);
        }
        let values = counts
            .iter()
            .map(|&c| S::from_f64(c as f64 / norm).unwrap())
            .collect();
        Embedding::new(values)
    }
}

/// FNV-1a, 64-bit.
fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Settings for the remote embedding service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEncoderConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub batch_size: usize,
    /// Upper bound on concurrently in-flight batch requests.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
}

impl RemoteEncoderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            api_key_env: None,
            batch_size: 64,
            max_in_flight: 4,
            timeout_secs: 30,
            max_retries: 3,
            backoff_ms: 100,
            cache_dir: None,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Batched JSON-over-HTTP embedding client: bounded retries with
/// exponential backoff, a per-batch timeout, and a content-addressed
/// on-disk cache keyed by (model, text hash).
#[derive(Debug)]
pub struct RemoteEncoder {
    config: RemoteEncoderConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    cache: Option<EmbeddingCache>,
}

type BatchResult = Result<Vec<Vec<f64>>, SemanticError>;

impl RemoteEncoder {
    pub fn new(config: RemoteEncoderConfig) -> Result<Self, SemanticError> {
        if config.dim == 0 {
            return Err(SemanticError::EmptyEmbedding);
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                SemanticError::Transport(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| SemanticError::Transport(e.to_string()))?;
        let cache = config.cache_dir.as_ref().map(|dir| EmbeddingCache::new(dir.clone()));
        Ok(Self { config, api_key, client, cache })
    }

    fn encode_batch<S: Scalar>(&self, texts: &[String]) -> Result<Vec<Embedding<S>>, SemanticError> {
        let batch_size = self.config.batch_size.max(1);
        let batches: Vec<&[String]> = texts.chunks(batch_size).collect();
        let results: Mutex<Vec<Option<BatchResult>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.max(1).min(batches.len().max(1));
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= batches.len() {
                        break;
                    }
                    let result = self.fetch_batch(batches[i]);
                    results.lock().unwrap()[i] = Some(result);
                });
            }
        });
        // Reassemble in input order regardless of completion order.
        let mut values = Vec::with_capacity(texts.len());
        for slot in results.into_inner().unwrap() {
            values.extend(slot.expect("worker filled every slot")?);
        }
        let mut out = Vec::with_capacity(values.len());
        for (i, vec) in values.into_iter().enumerate() {
            let emb = Embedding::new(vec.into_iter().map(|v| S::from_f64(v).unwrap()).collect())
                .map_err(|e| SemanticError::BatchItem { item: i, source: Box::new(e) })?;
            out.push(emb);
        }
        Ok(out)
    }

    /// One batch: serve what the cache has, fetch the rest, cache the
    /// fresh vectors.
    fn fetch_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, SemanticError> {
        let mut resolved: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut missing: Vec<usize> = Vec::new();
        if let Some(cache) = &self.cache {
            for (i, text) in texts.iter().enumerate() {
                match cache.get(&self.config.model, text)? {
                    Some(values) => {
                        if values.len() != self.config.dim {
                            return Err(SemanticError::Integrity(format!(
                                "cached vector has dimension {} but encoder expects {}",
                                values.len(),
                                self.config.dim
                            )));
                        }
                        resolved[i] = Some(values);
                    }
                    None => missing.push(i),
                }
            }
        } else {
            missing = (0..texts.len()).collect();
        }
        if !missing.is_empty() {
            let inputs: Vec<&str> = missing.iter().map(|&i| texts[i].as_str()).collect();
            let vectors = self.request_vectors(&inputs)?;
            for (&i, values) in missing.iter().zip(vectors) {
                if let Some(cache) = &self.cache {
                    cache.put(&self.config.model, &texts[i], &values)?;
                }
                resolved[i] = Some(values);
            }
        }
        Ok(resolved.into_iter().map(|v| v.expect("every slot resolved")).collect())
    }

    fn request_vectors(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>, SemanticError> {
        let body = EmbedRequest { model: &self.config.model, inputs };
        let mut attempt = 0u32;
        loop {
            let mut request = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let (retryable, detail) = match request.send() {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: EmbedResponse = resp
                        .json()
                        .map_err(|e| SemanticError::Transport(format!("bad response body: {e}")))?;
                    if parsed.vectors.len() != inputs.len() {
                        return Err(SemanticError::Integrity(format!(
                            "requested {} vectors, got {}",
                            inputs.len(),
                            parsed.vectors.len()
                        )));
                    }
                    for v in &parsed.vectors {
                        if v.len() != self.config.dim {
                            return Err(SemanticError::Integrity(format!(
                                "backend returned dimension {} but encoder expects {}",
                                v.len(),
                                self.config.dim
                            )));
                        }
                    }
                    return Ok(parsed.vectors);
                }
                Ok(resp) => (resp.status().is_server_error(), format!("status {}", resp.status())),
                Err(e) => (true, e.to_string()),
            };
            if !retryable || attempt >= self.config.max_retries {
                return Err(SemanticError::Transport(format!(
                    "embedding request failed after {} attempt(s): {detail}",
                    attempt + 1
                )));
            }
            thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
            attempt += 1;
        }
    }
}

/// Content-addressed on-disk map from (model, text) to a vector. Keys are
/// SHA-256 over `model \0 text`; values are JSON arrays written atomically.
#[derive(Debug)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    fn key_path(&self, model: &str, text: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(model.as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.dir.join(format!("{hex}.json"))
    }

    pub fn get(&self, model: &str, text: &str) -> Result<Option<Vec<f64>>, SemanticError> {
        let path = self.key_path(model, text);
        match fs::read(&path) {
            Ok(bytes) => {
                let values: Vec<f64> = serde_json::from_slice(&bytes).map_err(|e| {
                    SemanticError::Integrity(format!("corrupt cache entry {}: {e}", path.display()))
                })?;
                Ok(Some(values))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(SemanticError::Io { path: path.display().to_string(), source: e }),
        }
    }

    pub fn put(&self, model: &str, text: &str, values: &[f64]) -> Result<(), SemanticError> {
        let path = self.key_path(model, text);
        let bytes = serde_json::to_vec(values)
            .map_err(|e| SemanticError::Integrity(e.to_string()))?;
        crate::util::atomic_write(&path, &bytes)
            .map_err(|e| SemanticError::Io { path: path.display().to_string(), source: e })
    }

    /// Number of cached entries (for tests and diagnostics).
    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|entries| entries.filter_map(Result::ok).count())
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::cosine_sim;

    #[test]
    fn local_test_is_deterministic() {
        let enc = EncoderHandle::local_test();
        let a: Embedding<f64> = enc.encode("aspirin").unwrap();
        let b: Embedding<f64> = enc.encode("aspirin").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), DEFAULT_ENCODER_DIM);
    }

    #[test]
    fn shared_trigrams_give_positive_similarity() {
        let enc = EncoderHandle::local_test();
        let a: Embedding<f64> = enc.encode("aspirin").unwrap();
        let b: Embedding<f64> = enc.encode("aspirin dose").unwrap();
        let sim = cosine_sim(&a, &b).unwrap();
        assert!(sim > 0.0, "shared character n-grams must overlap, got {sim}");
    }

    #[test]
    fn local_test_vectors_are_unit_norm() {
        let enc = EncoderHandle::local_test();
        let e: Embedding<f64> = enc.encode("heart attack treatment").unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_texts_use_whole_text_gram() {
        let enc = EncoderHandle::local_test();
        let e: Embedding<f64> = enc.encode("ab").unwrap();
        assert!(e.norm() > 0.0);
    }

    #[test]
    fn empty_text_is_an_input_error() {
        let enc = EncoderHandle::local_test();
        assert!(matches!(enc.encode::<f64>("   "), Err(SemanticError::EmptyText)));
    }

    #[test]
    fn batch_matches_single_encodes() {
        let enc = EncoderHandle::local_test();
        let texts = vec!["one".to_string(), "two words".to_string(), "three word text".to_string()];
        let batch: Vec<Embedding<f64>> = enc.encode_batch(&texts).unwrap();
        for (text, emb) in texts.iter().zip(&batch) {
            assert_eq!(&enc.encode::<f64>(text).unwrap(), emb);
        }
    }

    #[test]
    fn fnv_vector_known_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path().to_path_buf());
        assert_eq!(cache.get("m", "text").unwrap(), None);
        cache.put("m", "text", &[0.25, 0.5]).unwrap();
        assert_eq!(cache.get("m", "text").unwrap(), Some(vec![0.25, 0.5]));
        // different model key misses
        assert_eq!(cache.get("other", "text").unwrap(), None);
        assert_eq!(cache.len(), 1);
    }
}
