use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::EmbeddingVector;
use crate::http::{self, HttpError, RetryPolicy};

pub const TEST_EMBEDDER_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedder configuration: {0}")]
    Config(String),
}

/// Text to vector. Implementations are shared across threads.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Bag of lowercase word tokens, each hashed (FNV-1a) into one of 256
/// buckets, then L2-normalized. Word order does not matter.
#[derive(Debug, Clone, Copy, Default)]
pub struct TestEmbedder;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for TestEmbedder {
    fn name(&self) -> &str {
        "test"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut counts = vec![0.0f64; TEST_EMBEDDER_DIM];
        let mut any = false;
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let token = token.to_lowercase();
            counts[(fnv1a(token.as_bytes()) % TEST_EMBEDDER_DIM as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            return Err(EmbedError::EmptyText);
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut counts {
            *c /= norm;
        }
        EmbeddingVector::new(counts).map_err(|e| EmbedError::Malformed(e.to_string()))
    }
}

/// Client for the embeddings JSON format: request `{input: [texts], model}`,
/// response `{data: [{embedding: [floats]}]}` in input order.
pub struct HttpEmbedder {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    policy: RetryPolicy,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self, EmbedError> {
        Ok(Self {
            client: Client::builder().build().map_err(|e| EmbedError::Config(e.to_string()))?,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_secs(60),
            policy: RetryPolicy::default(),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> &str {
        "http"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text])?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "input": texts, "model": self.model });
        let reply = http::post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &body,
            self.timeout,
            self.policy,
        )?;
        let parsed: EmbeddingResponse =
            serde_json::from_value(reply).map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Malformed(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        let out: Vec<EmbeddingVector> = parsed
            .data
            .into_iter()
            .map(|item| EmbeddingVector::new(item.embedding).map_err(|e| EmbedError::Malformed(e.to_string())))
            .collect::<Result<_, _>>()?;
        if let Some(bad) = out.iter().find(|v| v.dim() != out[0].dim()) {
            return Err(EmbedError::Malformed(format!(
                "mixed dimensions {} and {}",
                out[0].dim(),
                bad.dim()
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Test,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model: String,
    pub request_timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Test,
            endpoint: None,
            model: "all-MiniLM-L6-v2".into(),
            request_timeout_secs: 60,
            max_retries: 3,
        }
    }
}

pub fn build_embedder(config: &EmbedderConfig) -> Result<Box<dyn Embedder>, EmbedError> {
    match config.kind {
        EmbedderKind::Test => Ok(Box::new(TestEmbedder)),
        EmbedderKind::Http => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| EmbedError::Config("http embedder needs an endpoint".into()))?;
            let e = HttpEmbedder::new(endpoint, config.model.clone(), http::api_key_from_env())?
                .with_timeout(Duration::from_secs(config.request_timeout_secs))
                .with_retry(RetryPolicy {
                    max_retries: config.max_retries,
                    ..RetryPolicy::default()
                });
            Ok(Box::new(e))
        }
    }
}
