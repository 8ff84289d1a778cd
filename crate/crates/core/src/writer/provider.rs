use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::mock::MockChatProvider;
use crate::http::{self, HttpError, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Sampling and transport settings for one story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: u64,
    pub max_retries: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Upper bound on `max_retries`.
pub const MAX_RETRIES_LIMIT: u32 = 10;

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            model_id: "gpt-3.5-turbo".into(),
            temperature: 1.0,
            max_output_tokens: 400,
            request_timeout_secs: 60,
            max_retries: 3,
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(format!("max_retries {} exceeds {MAX_RETRIES_LIMIT}", self.max_retries));
        }
        if self.model_id.trim().is_empty() {
            return Err("model_id is empty".into());
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid conversation: {0}")]
    InvalidHistory(String),
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("completion was empty")]
    EmptyCompletion,
    #[error("provider configuration: {0}")]
    Config(String),
}

/// A chat-completion backend. Implementations are shared across worker
/// threads and keep no per-story state.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the assistant reply to `history`, which starts with the
    /// system message and ends with a user message.
    fn chat_complete(
        &self,
        history: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, ProviderError>;

    /// True when identical inputs always give identical replies.
    fn is_deterministic(&self) -> bool {
        false
    }
}

pub(crate) fn check_history(history: &[ChatMessage]) -> Result<(), ProviderError> {
    match (history.first(), history.last()) {
        (Some(first), Some(last)) if first.role == Role::System && last.role == Role::User => {}
        (None, _) => return Err(ProviderError::InvalidHistory("history is empty".into())),
        (Some(first), _) if first.role != Role::System => {
            return Err(ProviderError::InvalidHistory(
                "history must begin with the system message".into(),
            ))
        }
        _ => {
            return Err(ProviderError::InvalidHistory(
                "history must end with a user message".into(),
            ))
        }
    }
    if let Some(m) = history.iter().find(|m| m.content.trim().is_empty()) {
        return Err(ProviderError::InvalidHistory(format!(
            "empty {:?} message",
            m.role
        )));
    }
    Ok(())
}

/// Client for the chat-completions JSON format:
/// request `{model, messages, temperature, max_tokens[, seed]}`,
/// reply text at `choices[0].message.content`.
pub struct HttpChatProvider {
    client: Client,
    endpoint: String,
    api_key: Option<String>,
    base_delay: Duration,
}

impl HttpChatProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, ProviderError> {
        let client = Client::builder()
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            api_key,
            base_delay: RetryPolicy::default().base_delay,
        })
    }

    /// Reads the key from `FABLE_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, ProviderError> {
        let key = http::api_key_from_env().ok_or_else(|| {
            ProviderError::Config(format!("{} is not set", http::API_KEY_ENV))
        })?;
        Self::new(endpoint, Some(key))
    }

    /// First retry delay; later ones double.
    pub fn with_base_delay(mut self, delay: Duration) -> Self {
        self.base_delay = delay;
        self
    }
}

impl ChatProvider for HttpChatProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn chat_complete(
        &self,
        history: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, ProviderError> {
        check_history(history)?;
        let mut body = json!({
            "model": params.model_id,
            "messages": history,
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let policy = RetryPolicy {
            max_retries: params.max_retries,
            base_delay: self.base_delay,
            ..RetryPolicy::default()
        };
        let reply = http::post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &body,
            params.request_timeout(),
            policy,
        )?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                HttpError::Malformed("missing choices[0].message.content".into())
            })?;
        if content.trim().is_empty() {
            return Err(ProviderError::EmptyCompletion);
        }
        Ok(content.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

/// Provider selection as it appears in config files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(flatten)]
    pub params: GenerationParams,
}

pub fn build_provider(config: &ProviderConfig) -> Result<Box<dyn ChatProvider>, ProviderError> {
    config.params.validate().map_err(ProviderError::Config)?;
    match config.kind {
        ProviderKind::Mock => Ok(Box::new(MockChatProvider)),
        ProviderKind::Http => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| ProviderError::Config("http provider needs an endpoint".into()))?;
            Ok(Box::new(HttpChatProvider::from_env(endpoint)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(GenerationParams::default().validate().is_ok());
        let hot = GenerationParams {
            temperature: 2.5,
            ..Default::default()
        };
        assert!(hot.validate().is_err());
        let many = GenerationParams {
            max_retries: 11,
            ..Default::default()
        };
        assert!(many.validate().is_err());
        let zero = GenerationParams {
            max_output_tokens: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn history_shape() {
        assert!(check_history(&[]).is_err());
        assert!(check_history(&[ChatMessage::user("hi")]).is_err());
        assert!(check_history(&[ChatMessage::system("s"), ChatMessage::assistant("a")]).is_err());
        assert!(check_history(&[ChatMessage::system("s"), ChatMessage::user(" ")]).is_err());
        assert!(check_history(&[ChatMessage::system("s"), ChatMessage::user("u")]).is_ok());
    }

    #[test]
    fn config_from_toml() {
        let cfg: ProviderConfig = toml::from_str(
            "kind = \"http\"\nendpoint = \"http://localhost:1/v1/chat/completions\"\nmodel_id = \"m\"\ntemperature = 0.7\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ProviderKind::Http);
        assert_eq!(cfg.params.model_id, "m");
        assert_eq!(cfg.params.max_output_tokens, 400);
        let mock = build_provider(&ProviderConfig::default()).unwrap();
        assert!(mock.is_deterministic());
        let no_endpoint = ProviderConfig {
            kind: ProviderKind::Http,
            ..Default::default()
        };
        assert!(matches!(build_provider(&no_endpoint), Err(ProviderError::Config(_))));
    }

    #[test]
    fn messages_serialize_with_lowercase_roles() {
        let m = ChatMessage::system("x");
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"role":"system","content":"x"}"#);
    }
}
