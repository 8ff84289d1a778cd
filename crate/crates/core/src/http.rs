//! JSON-over-HTTP POST with exponential backoff, shared by the chat and
//! embedding clients.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;
use thiserror::Error;

/// Environment variable holding the bearer token for live endpoints.
pub const API_KEY_ENV: &str = "FABLE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base·2^(attempt-1), capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
}

fn is_transient(status: StatusCode) -> bool {
    status.is_server_error()
        || status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
}

pub(crate) fn api_key_from_env() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty())
}

/// POSTs `body`, retrying connection failures, timeouts, 408, 429 and 5xx.
/// On exhaustion the last failure is returned (as `Status` when the server
/// answered, `Transport` otherwise).
pub(crate) fn post_json(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    timeout: Duration,
    policy: RetryPolicy,
) -> Result<Value, HttpError> {
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let mut req = client.post(url).timeout(timeout).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let failure = match req.send() {
            Ok(resp) => {
                let status = resp.status();
                let text = resp.text().map_err(|e| HttpError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                })?;
                if status.is_success() {
                    return serde_json::from_str(&text).map_err(|e| HttpError::Malformed(e.to_string()));
                }
                let err = HttpError::Status {
                    status: status.as_u16(),
                    body: text.chars().take(500).collect(),
                };
                if !is_transient(status) {
                    return Err(err);
                }
                err
            }
            Err(e) => HttpError::Transport {
                attempts: attempt,
                message: e.to_string(),
            },
        };
        if attempt > policy.max_retries {
            return Err(match failure {
                HttpError::Transport { message, .. } => HttpError::Transport {
                    attempts: attempt,
                    message,
                },
                other => other,
            });
        }
        thread::sleep(policy.backoff(attempt));
    }
}
