//! Prompt execution against chat-completion backends.
//!
//! [`run_eval`] drives a bounded number of concurrent requests, retries
//! transient failures with exponential backoff and appends one
//! [`RunRecord`] per prompt to a JSONL run log. Prompts whose key already
//! has an `ok` record in the log are skipped, so an interrupted run can be
//! resumed by calling it again with the same log.

mod http;
mod log;
mod mock;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::prompt::{ChatMessage, ChatPrompt, PromptMeta};
use crate::sampling::fnv1a64;

pub use http::{HttpChatClient, DEFAULT_API_KEY_ENV};
pub use log::{read_log, RunLog};
pub use mock::ScriptedMock;

/// Identity of one model invocation within a log.
pub type RunKey = PromptMeta;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed run log: {message}")]
    MalformedLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("configuration: {0}")]
    Config(String),
}

/// Failure of a single chat call.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("transient: {0}")]
    Retryable(String),
    #[error("{0}")]
    Fatal(String),
}

/// Decoding settings. Decoding is always greedy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_id: String,
    pub max_new_tokens: u32,
}

impl GenerationConfig {
    pub fn for_kind(model_id: impl Into<String>, kind: TaskKind) -> Self {
        GenerationConfig {
            model_id: model_id.into(),
            max_new_tokens: kind.max_new_tokens(),
        }
    }

    pub fn temperature(&self) -> u32 {
        0
    }
}

#[async_trait]
pub trait ModelClient: Send + Sync {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        gen: &GenerationConfig,
    ) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub key: RunKey,
    /// FNV-1a-64 of the JSON-serialized messages, 16 hex digits.
    pub prompt_digest: String,
    pub response_text: String,
    pub status: RunStatus,
    pub latency_ms: u64,
    pub model_id: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

pub fn prompt_digest(messages: &[ChatMessage]) -> String {
    let json = serde_json::to_string(messages).expect("messages serialize");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Additional attempts after the first.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub run_id: String,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            run_id: "run".into(),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub completed: usize,
    pub failed: usize,
    pub skipped: usize,
}

async fn call_with_retry(
    client: &dyn ModelClient,
    messages: &[ChatMessage],
    gen: &GenerationConfig,
    retry: RetryPolicy,
) -> Result<String, ClientError> {
    let mut attempt = 0;
    loop {
        match client.chat(messages, gen).await {
            Ok(text) => return Ok(text),
            Err(ClientError::Retryable(msg)) if attempt < retry.retries => {
                let delay = retry.delay(attempt);
                tracing::debug!(attempt, ?delay, "retrying after transient error: {msg}");
                tokio::time::sleep(delay).await;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs every prompt not yet completed in `log_path` and appends the outcomes.
pub async fn run_eval<I>(
    prompts: I,
    client: &dyn ModelClient,
    gen: &GenerationConfig,
    options: &RunOptions,
    log_path: &Path,
) -> Result<RunSummary, InferenceError>
where
    I: IntoIterator<Item = ChatPrompt>,
{
    if options.max_in_flight == 0 {
        return Err(InferenceError::Config("max_in_flight must be at least 1".into()));
    }
    let mut log = RunLog::open(log_path)?;
    let mut summary = RunSummary::default();
    let mut seen: HashSet<RunKey> = HashSet::new();
    let mut pending = Vec::new();
    for prompt in prompts {
        if log.is_completed(&prompt.meta) || !seen.insert(prompt.meta.clone()) {
            summary.skipped += 1;
        } else {
            pending.push(prompt);
        }
    }

    let retry = options.retry;
    let mut results = stream::iter(pending)
        .map(|prompt| async move {
            let started = Instant::now();
            let outcome = call_with_retry(client, &prompt.messages, gen, retry).await;
            let latency_ms = started.elapsed().as_millis() as u64;
            let (response_text, status) = match outcome {
                Ok(text) => (text, RunStatus::Ok),
                Err(e) => (String::new(), RunStatus::Error(e.to_string())),
            };
            RunRecord {
                run_id: options.run_id.clone(),
                prompt_digest: prompt_digest(&prompt.messages),
                key: prompt.meta,
                response_text,
                status,
                latency_ms,
                model_id: gen.model_id.clone(),
            }
        })
        .buffer_unordered(options.max_in_flight);

    while let Some(record) = results.next().await {
        if record.is_ok() {
            summary.completed += 1;
        } else {
            summary.failed += 1;
        }
        log.append(&record)?;
    }
    Ok(summary)
}
