//! OpenAI-compatible `/chat/completions` client.

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{ClientError, GenerationConfig, InferenceError, ModelClient};
use crate::prompt::ChatMessage;

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: u32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::Client,
}

impl HttpChatClient {
    /// `api_key_env` names the environment variable holding the bearer
    /// token; `None` sends no authorization header (local servers).
    pub fn new(base_url: &str, api_key_env: Option<&str>) -> Result<Self, InferenceError> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                InferenceError::Config(format!("environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let http = reqwest::Client::builder()
            .build()
            .map_err(|e| InferenceError::Config(e.to_string()))?;
        Ok(HttpChatClient {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            http,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn is_retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
        || status.is_server_error()
}

#[async_trait]
impl ModelClient for HttpChatClient {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        gen: &GenerationConfig,
    ) -> Result<String, ClientError> {
        let body = ChatRequest {
            model: &gen.model_id,
            messages,
            temperature: gen.temperature(),
            max_tokens: gen.max_new_tokens,
        };
        let mut request = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .await
            .map_err(|e| ClientError::Retryable(format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            let msg = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if is_retryable(status) {
                ClientError::Retryable(msg)
            } else {
                ClientError::Fatal(msg)
            });
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| ClientError::Fatal(format!("unreadable response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| ClientError::Fatal("response has no choices".into()))
    }
}
