//! Minimal blocking client for chat-completion style HTTP endpoints.
//!
//! Request: `POST {base_url}/chat/completions` with
//! `{"model": ..., "messages": [{"role": ..., "content": ...}], "temperature": ...}`.
//! Response: `{"choices": [{"message": {"content": "..."}}]}`; the first choice is used.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub temperature: Option<f64>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            token_env: "SDS_API_TOKEN".into(),
            timeout_secs: 60,
            max_retries: 2,
            retry_backoff_ms: 500,
            temperature: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion payload: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Extracts the first choice's text from a raw response body.
pub fn parse_completion(body: &str) -> Result<String, ChatError> {
    let resp: CompletionResponse = serde_json::from_str(body).map_err(|e| ChatError::Malformed(e.to_string()))?;
    resp.choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| ChatError::Malformed("no choices with message content".into()))
}

/// Holds only connection settings; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ChatClient {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Sends one completion request, retrying transport failures, 429 and 5xx.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError> {
        let body = serde_json::to_string(&CompletionRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
        })
        .map_err(|e| ChatError::Malformed(e.to_string()))?;
        let token = std::env::var(&self.config.token_env).ok().filter(|t| !t.is_empty());

        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self.agent.post(&self.url()).header("Content-Type", "application/json");
            if let Some(t) = &token {
                req = req.header("Authorization", format!("Bearer {t}"));
            }
            let retryable = match req.send(body.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().map_err(|e| ChatError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    });
                    match (status, text) {
                        (200..=299, Ok(text)) => return parse_completion(&text),
                        (s, Ok(text)) if s == 429 || s >= 500 => ChatError::Status { status: s, body: text },
                        (s, Ok(text)) => return Err(ChatError::Status { status: s, body: text }),
                        (_, Err(e)) => e,
                    }
                }
                Err(e) => ChatError::Transport { attempts: attempt, message: e.to_string() },
            };
            if attempt > self.config.max_retries {
                return Err(match retryable {
                    ChatError::Transport { message, .. } => ChatError::Transport { attempts: attempt, message },
                    other => other,
                });
            }
            let backoff = self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
            if backoff > 0 {
                std::thread::sleep(Duration::from_millis(backoff));
            }
        }
    }
}
