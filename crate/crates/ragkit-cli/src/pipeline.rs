//! Shared plumbing between commands: resource loading, retrieval over the
//! configured indexes, and the question/gold file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use ragkit::corpus::{load_corpus, tokenize, CorpusFormat, DocId, Document, Query};
use ragkit::lexical::{lexical_search_tokens, load_index, InvertedIndex, QueryTermSemantics};
use ragkit::ragen::{
    AnswerOptions, LlmBackend, MockBackend, RemoteBackend, RemoteBackendConfig,
};
use ragkit::rerank::{fuse, DEFAULT_FUSION_ALPHA, DEFAULT_RRF_K};
use ragkit::semantic::{
    load_vector_index, semantic_search, EncoderHandle, RemoteEncoderConfig,
};
use ragkit::{Bm25, DenseIndex, Fusion, Ranking};

use crate::config::{
    BackendKind, EncoderKind, FusionKind, RunConfig,
};
use crate::CliError;

/// Which retrieval route a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    Lexical,
    Semantic,
    Hybrid,
}

impl std::str::FromStr for RetrievalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Self::Lexical),
            "semantic" => Ok(Self::Semantic),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(format!("unknown mode {other:?} (expected lexical, semantic, or hybrid)")),
        }
    }
}

impl RetrievalMode {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Lexical => "lexical",
            Self::Semantic => "semantic",
            Self::Hybrid => "hybrid",
        }
    }
}

pub fn fusion_strategy(config: &RunConfig) -> Fusion {
    match config.fusion.kind {
        FusionKind::SemanticOnly => Fusion::SemanticOnly,
        FusionKind::LexicalOnly => Fusion::LexicalOnly,
        FusionKind::Weighted => Fusion::Weighted {
            alpha: config.fusion.alpha.unwrap_or(DEFAULT_FUSION_ALPHA),
        },
        FusionKind::Rrf => Fusion::Rrf { rrf_k: config.fusion.rrf_k.unwrap_or(DEFAULT_RRF_K) },
    }
}

/// Retrieval mode implied by the configured fusion strategy.
pub fn configured_mode(config: &RunConfig) -> RetrievalMode {
    match config.fusion.kind {
        FusionKind::SemanticOnly => RetrievalMode::Semantic,
        FusionKind::LexicalOnly => RetrievalMode::Lexical,
        FusionKind::Weighted | FusionKind::Rrf => RetrievalMode::Hybrid,
    }
}

pub fn build_encoder(config: &RunConfig) -> Result<EncoderHandle, CliError> {
    match config.encoder.kind {
        EncoderKind::LocalTest => Ok(EncoderHandle::local_test_with_dim(config.encoder.dim)),
        EncoderKind::Remote => {
            let enc = &config.encoder;
            let mut remote = RemoteEncoderConfig::new(
                enc.endpoint.clone().expect("validated"),
                enc.model.clone().expect("validated"),
                enc.dim,
            );
            remote.api_key_env = enc.api_key_env.clone();
            remote.batch_size = enc.batch_size;
            remote.max_in_flight = enc.max_in_flight;
            remote.timeout_secs = enc.timeout_secs;
            remote.max_retries = enc.max_retries;
            remote.backoff_ms = enc.backoff_ms;
            remote.cache_dir = enc.cache_dir.clone();
            EncoderHandle::remote(remote).map_err(|e| CliError::Runtime(e.into()))
        }
    }
}

pub fn build_backend(config: &RunConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    let backend = config.backend_config()?;
    match backend.kind {
        BackendKind::Mock => {
            let script = backend.script.as_ref().expect("validated");
            RunConfig::require_file(script, "backend.script")?;
            let mut mock = MockBackend::from_script_file(script)
                .map_err(|e| CliError::Runtime(e.into()))?;
            if let Some(log) = &backend.request_log {
                if let Some(parent) = log.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::Runtime(e.into()))?;
                }
                // a fresh log per run keeps reruns byte-identical
                let _ = std::fs::remove_file(log);
                mock = mock.with_request_log(log.clone());
            }
            Ok(Box::new(mock))
        }
        BackendKind::Remote => {
            let mut remote = RemoteBackendConfig::new(
                backend.endpoint.clone().expect("validated"),
                backend.model.clone().expect("validated"),
            );
            remote.api_key_env = backend.api_key_env.clone();
            remote.timeout_secs = backend.timeout_secs;
            remote.max_retries = backend.max_retries;
            remote.backoff_ms = backend.backoff_ms;
            remote.supports_logprobs = backend.supports_logprobs;
            Ok(Box::new(
                RemoteBackend::new(remote).map_err(|e| CliError::Runtime(e.into()))?,
            ))
        }
    }
}

pub fn load_documents(config: &RunConfig) -> Result<Vec<Document>, CliError> {
    let corpus = config.corpus()?;
    RunConfig::require_file(&corpus.docs, "corpus.docs")?;
    load_corpus(&corpus.docs, CorpusFormat::BeirJsonl).map_err(|e| CliError::Runtime(e.into()))
}

pub fn document_map(docs: Vec<Document>) -> BTreeMap<DocId, Document> {
    docs.into_iter().map(|d| (d.id.clone(), d)).collect()
}

/// The loaded retrieval resources a command needs for its mode.
pub struct Retriever {
    lexical: Option<(InvertedIndex, Bm25, QueryTermSemantics)>,
    semantic: Option<(DenseIndex, EncoderHandle)>,
    strategy: Fusion,
}

impl Retriever {
    /// Loads the index files the mode requires; missing files are usage
    /// errors that name the path.
    pub fn open(config: &RunConfig, mode: RetrievalMode) -> Result<Self, CliError> {
        let index = config.index()?;
        let need_lexical = matches!(mode, RetrievalMode::Lexical | RetrievalMode::Hybrid);
        let need_semantic = matches!(mode, RetrievalMode::Semantic | RetrievalMode::Hybrid);
        let lexical = if need_lexical {
            let path = index.lexical.as_ref().ok_or_else(|| {
                CliError::Usage("config is missing index.lexical (required by this mode)".into())
            })?;
            RunConfig::require_file(path, "index.lexical")?;
            let loaded = load_index(path).map_err(|e| CliError::Runtime(e.into()))?;
            let params = loaded.params();
            Some((loaded, params, config.bm25.query_term_semantics))
        } else {
            None
        };
        let semantic = if need_semantic {
            let path = index.vector.as_ref().ok_or_else(|| {
                CliError::Usage("config is missing index.vector (required by this mode)".into())
            })?;
            RunConfig::require_file(path, "index.vector")?;
            let loaded: DenseIndex =
                load_vector_index(path).map_err(|e| CliError::Runtime(e.into()))?;
            let encoder = build_encoder(config)?;
            if encoder.dim() != loaded.dim() {
                return Err(CliError::Usage(format!(
                    "encoder dimension {} does not match vector index dimension {}",
                    encoder.dim(),
                    loaded.dim()
                )));
            }
            Some((loaded, encoder))
        } else {
            None
        };
        Ok(Self { lexical, semantic, strategy: fusion_strategy(config) })
    }

    pub fn retrieve(&self, query: &Query, mode: RetrievalMode, k: usize) -> Result<Ranking, CliError> {
        match mode {
            RetrievalMode::Lexical => self.lexical_ranking(query, k),
            RetrievalMode::Semantic => self.semantic_ranking(query, k),
            RetrievalMode::Hybrid => {
                let lex = self.lexical_ranking(query, k)?;
                let sem = self.semantic_ranking(query, k)?;
                fuse(&lex, &sem, &self.strategy, k).map_err(|e| CliError::Runtime(e.into()))
            }
        }
    }

    fn lexical_ranking(&self, query: &Query, k: usize) -> Result<Ranking, CliError> {
        let (index, params, semantics) = self
            .lexical
            .as_ref()
            .expect("lexical index loaded for this mode");
        let tokens = semantics.apply(&tokenize(&query.text));
        lexical_search_tokens(index, params, &query.id, &tokens, k)
            .map_err(|e| CliError::Runtime(e.into()))
    }

    fn semantic_ranking(&self, query: &Query, k: usize) -> Result<Ranking, CliError> {
        let (index, encoder) = self
            .semantic
            .as_ref()
            .expect("vector index loaded for this mode");
        let vector = encoder
            .encode(&query.text)
            .map_err(|e| CliError::Runtime(e.into()))?;
        semantic_search(index, &query.id, &vector, k).map_err(|e| CliError::Runtime(e.into()))
    }
}

/// One benchmark question; options present for closed-ended tasks.
#[derive(Debug, Clone, Deserialize)]
pub struct QuestionRecord {
    #[serde(rename = "_id")]
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
}

impl QuestionRecord {
    pub fn query(&self) -> Result<Query, CliError> {
        Query::new(self.id.clone(), self.text.clone()).map_err(|e| CliError::Runtime(e.into()))
    }

    pub fn answer_options(&self) -> Option<AnswerOptions> {
        if self.options.is_empty() {
            None
        } else {
            Some(AnswerOptions(
                self.options.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            ))
        }
    }
}

/// One gold answer: label for closed tasks, reference text otherwise.
#[derive(Debug, Clone, Deserialize)]
pub struct GoldRecord {
    #[serde(rename = "_id")]
    pub id: String,
    pub answer: String,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.into()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| {
            CliError::Usage(format!("{}:{}: malformed JSON: {e}", path.display(), idx + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionRecord>, CliError> {
    RunConfig::require_file(path, "questions")?;
    let questions: Vec<QuestionRecord> = read_jsonl(path, "questions file")?;
    let mut seen = std::collections::HashSet::new();
    for q in &questions {
        if !seen.insert(q.id.clone()) {
            return Err(CliError::Usage(format!("duplicate question id {:?}", q.id)));
        }
    }
    Ok(questions)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldRecord>, CliError> {
    RunConfig::require_file(path, "gold")?;
    read_jsonl(path, "gold file")
}
