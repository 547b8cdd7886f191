//! Run configuration: one TOML file with `${VAR}` environment
//! interpolation for secrets. Unknown keys are rejected; flags override
//! file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use ragkit::lexical::QueryTermSemantics;
use ragkit::ragen::ProfileOverrides;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<CorpusConfig>,
    pub index: Option<IndexConfig>,
    #[serde(default)]
    pub bm25: Bm25Config,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    pub backend: Option<BackendConfig>,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub docs: PathBuf,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    pub lexical: Option<PathBuf>,
    pub vector: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Config {
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub query_term_semantics: QueryTermSemantics,
}

fn default_k1() -> f64 {
    1.2
}

fn default_b() -> f64 {
    0.75
}

impl Default for Bm25Config {
    fn default() -> Self {
        Self { k1: default_k1(), b: default_b(), query_term_semantics: QueryTermSemantics::Stream }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    LocalTest,
    Remote,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "default_encoder_kind")]
    pub kind: EncoderKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_encoder_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
}

fn default_encoder_kind() -> EncoderKind {
    EncoderKind::LocalTest
}

fn default_dim() -> usize {
    ragkit::semantic::DEFAULT_ENCODER_DIM
}

fn default_batch_size() -> usize {
    64
}

fn default_in_flight() -> usize {
    4
}

fn default_encoder_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    100
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::LocalTest,
            dim: default_dim(),
            endpoint: None,
            model: None,
            api_key_env: None,
            batch_size: default_batch_size(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_encoder_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    SemanticOnly,
    LexicalOnly,
    Weighted,
    Rrf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    #[serde(default = "default_fusion_kind")]
    pub kind: FusionKind,
    /// Semantic weight; only meaningful (and only accepted) for `weighted`.
    pub alpha: Option<f64>,
    /// Rank constant; only meaningful (and only accepted) for `rrf`.
    pub rrf_k: Option<f64>,
}

fn default_fusion_kind() -> FusionKind {
    FusionKind::Weighted
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { kind: FusionKind::Weighted, alpha: None, rrf_k: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Mock: fixture script path.
    pub script: Option<PathBuf>,
    /// Mock: optional JSONL file recording every request.
    pub request_log: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    #[serde(default = "default_backend_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_supports_logprobs")]
    pub supports_logprobs: bool,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_backend_timeout() -> u64 {
    60
}

fn default_supports_logprobs() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default = "default_budget")]
    pub context_budget: usize,
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_contexts_k")]
    pub contexts_k: usize,
    pub overrides: Option<ProfileOverrides>,
}

fn default_budget() -> usize {
    ragkit::ragen::DEFAULT_CONTEXT_BUDGET
}

fn default_threshold() -> f64 {
    ragkit::ragen::DEFAULT_CONFIDENCE_THRESHOLD
}

fn default_contexts_k() -> usize {
    5
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            context_budget: default_budget(),
            confidence_threshold: default_threshold(),
            contexts_k: default_contexts_k(),
            overrides: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_eval_k")]
    pub k: usize,
}

fn default_eval_k() -> usize {
    10
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: default_eval_k() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "default_eval_k")]
    pub k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { k: default_eval_k() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_output_dir() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let interpolated = interpolate_env(&raw)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&interpolated)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.fusion.kind {
            FusionKind::Weighted => {
                if self.fusion.rrf_k.is_some() {
                    return Err(CliError::Usage("fusion.rrf_k is only valid with kind = \"rrf\"".into()));
                }
                if let Some(alpha) = self.fusion.alpha {
                    if !(0.0..=1.0).contains(&alpha) {
                        return Err(CliError::Usage(format!("fusion.alpha must lie in [0, 1], got {alpha}")));
                    }
                }
            }
            FusionKind::Rrf => {
                if self.fusion.alpha.is_some() {
                    return Err(CliError::Usage("fusion.alpha is only valid with kind = \"weighted\"".into()));
                }
                if let Some(rrf_k) = self.fusion.rrf_k {
                    if rrf_k <= 0.0 {
                        return Err(CliError::Usage(format!("fusion.rrf_k must be positive, got {rrf_k}")));
                    }
                }
            }
            FusionKind::SemanticOnly | FusionKind::LexicalOnly => {
                if self.fusion.alpha.is_some() || self.fusion.rrf_k.is_some() {
                    return Err(CliError::Usage(
                        "fusion.alpha / fusion.rrf_k are not valid for pass-through fusion kinds".into(),
                    ));
                }
            }
        }
        if let Some(backend) = &self.backend {
            match backend.kind {
                BackendKind::Mock => {
                    if backend.script.is_none() {
                        return Err(CliError::Usage("backend.kind = \"mock\" requires backend.script".into()));
                    }
                }
                BackendKind::Remote => {
                    if backend.endpoint.is_none() || backend.model.is_none() {
                        return Err(CliError::Usage(
                            "backend.kind = \"remote\" requires backend.endpoint and backend.model".into(),
                        ));
                    }
                }
            }
        }
        if self.encoder.kind == EncoderKind::Remote
            && (self.encoder.endpoint.is_none() || self.encoder.model.is_none())
        {
            return Err(CliError::Usage(
                "encoder.kind = \"remote\" requires encoder.endpoint and encoder.model".into(),
            ));
        }
        Ok(())
    }

    /// Checks an input path exists before any long-running work starts.
    pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
        if !path.is_file() {
            return Err(CliError::Usage(format!("{what} path {} does not exist", path.display())));
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<&CorpusConfig, CliError> {
        self.corpus
            .as_ref()
            .ok_or_else(|| CliError::Usage("config is missing the [corpus] section".into()))
    }

    pub fn index(&self) -> Result<&IndexConfig, CliError> {
        self.index
            .as_ref()
            .ok_or_else(|| CliError::Usage("config is missing the [index] section".into()))
    }

    pub fn backend_config(&self) -> Result<&BackendConfig, CliError> {
        self.backend
            .as_ref()
            .ok_or_else(|| CliError::Usage("config is missing the [backend] section".into()))
    }
}

/// Replaces `${NAME}` with the environment variable's value. `$$`
/// escapes a literal dollar sign.
fn interpolate_env(raw: &str) -> Result<String, String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '$' {
            out.push(c);
            continue;
        }
        match chars.peek() {
            Some('$') => {
                chars.next();
                out.push('$');
            }
            Some('{') => {
                chars.next();
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                        Some(ch) => return Err(format!("invalid character {ch:?} in ${{...}} reference")),
                        None => return Err("unterminated ${...} reference".into()),
                    }
                }
                if name.is_empty() {
                    return Err("empty ${} reference".into());
                }
                let value = std::env::var(&name)
                    .map_err(|_| format!("environment variable {name} is not set"))?;
                out.push_str(&value);
            }
            _ => out.push('$'),
        }
    }
    Ok(out)
}
