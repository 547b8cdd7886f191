//! LLM backends: the JSON-over-HTTP chat contract plus a deterministic
//! scripted mock for tests and offline runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RagenError;

/// A chat-style completion request. This struct is the wire format: it
/// serializes directly to the request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub stop: Option<Vec<String>>,
    pub logprobs: bool,
}

/// The backend's reply: text plus optional per-token natural-log
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub token_logprobs: Option<Vec<f64>>,
}

/// An answer-generation backend.
pub trait LlmBackend: Send + Sync {
    fn model(&self) -> &str;
    fn supports_logprobs(&self) -> bool;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, RagenError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MockReply {
    text: String,
    #[serde(default)]
    token_logprobs: Option<Vec<f64>>,
}

/// One script rule: matches when the user prompt contains `contains` and,
/// if set, at most `max_passages` packed passages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MockRule {
    contains: String,
    #[serde(default)]
    max_passages: Option<usize>,
    reply: MockReply,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MockScript {
    #[serde(default)]
    rules: Vec<MockRule>,
    #[serde(default)]
    default: Option<MockReply>,
}

/// Deterministic scripted backend. Responses come from a fixture script;
/// every request is recorded for golden tests and can additionally be
/// appended to a JSONL request log on disk.
pub struct MockBackend {
    script: MockScript,
    log: Mutex<Vec<CompletionRequest>>,
    request_log_path: Option<PathBuf>,
}

impl MockBackend {
    pub fn from_script_file(path: &Path) -> Result<Self, RagenError> {
        let bytes = fs::read(path).map_err(|e| RagenError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let script: MockScript = serde_json::from_slice(&bytes)
            .map_err(|e| RagenError::Script(format!("{}: {e}", path.display())))?;
        Ok(Self { script, log: Mutex::new(Vec::new()), request_log_path: None })
    }

    /// A mock that answers every request identically.
    pub fn echo(text: &str, token_logprobs: Option<Vec<f64>>) -> Self {
        Self {
            script: MockScript {
                rules: Vec::new(),
                default: Some(MockReply { text: text.to_string(), token_logprobs }),
            },
            log: Mutex::new(Vec::new()),
            request_log_path: None,
        }
    }

    /// Additionally appends each request as a JSON line to `path`.
    pub fn with_request_log(mut self, path: PathBuf) -> Self {
        self.request_log_path = Some(path);
        self
    }

    /// All requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.log.lock().unwrap().clone()
    }
}

impl LlmBackend for MockBackend {
    fn model(&self) -> &str {
        "mock"
    }

    fn supports_logprobs(&self) -> bool {
        true
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, RagenError> {
        let mut log = self.log.lock().unwrap();
        log.push(request.clone());
        if let Some(path) = &self.request_log_path {
            let line = serde_json::to_string(request)
                .map_err(|e| RagenError::Script(e.to_string()))?;
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| RagenError::Io { path: path.display().to_string(), source: e })?;
            writeln!(file, "{line}")
                .map_err(|e| RagenError::Io { path: path.display().to_string(), source: e })?;
        }
        drop(log);
        let passages = request.user.matches("[doc:").count();
        let reply = self
            .script
            .rules
            .iter()
            .find(|rule| {
                request.user.contains(&rule.contains)
                    && rule.max_passages.is_none_or(|m| passages <= m)
            })
            .map(|rule| &rule.reply)
            .or(self.script.default.as_ref())
            .ok_or_else(|| RagenError::Script("no script rule matched the request".into()))?;
        Ok(CompletionResponse {
            text: reply.text.clone(),
            token_logprobs: reply.token_logprobs.clone(),
        })
    }
}

/// Settings for a remote chat backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub supports_logprobs: bool,
}

impl RemoteBackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: 60,
            max_retries: 3,
            backoff_ms: 100,
            supports_logprobs: true,
        }
    }
}

/// JSON-over-HTTP chat client with bounded retries and exponential
/// backoff. Credentials come from the environment variable named in the
/// config.
pub struct RemoteBackend {
    config: RemoteBackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteBackendConfig) -> Result<Self, RagenError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                RagenError::Transport(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| RagenError::Transport(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }
}

impl LlmBackend for RemoteBackend {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn supports_logprobs(&self) -> bool {
        self.config.supports_logprobs
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, RagenError> {
        let mut attempt = 0u32;
        loop {
            let mut http = self.client.post(&self.config.endpoint).json(request);
            if let Some(key) = &self.api_key {
                http = http.bearer_auth(key);
            }
            let (retryable, detail) = match http.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json()
                        .map_err(|e| RagenError::Transport(format!("bad response body: {e}")));
                }
                Ok(resp) => (resp.status().is_server_error(), format!("status {}", resp.status())),
                Err(e) => (true, e.to_string()),
            };
            if !retryable || attempt >= self.config.max_retries {
                return Err(RagenError::Transport(format!(
                    "completion request failed after {} attempt(s): {detail}",
                    attempt + 1
                )));
            }
            thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
            attempt += 1;
        }
    }
}
