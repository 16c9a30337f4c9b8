//! Shared error type and connection settings for model backends.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Network failure, timeout or server error that persisted through all retries.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    /// The endpoint answered, but not in the shape we need (e.g. no echoed log-probs).
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("invalid backend input: {0}")]
    InvalidInput(String),
}

pub const API_KEY_ENV: &str = "EXACT_API_KEY";
pub const BASE_URL_ENV: &str = "EXACT_BASE_URL";

/// Where and how to reach an OpenAI-compatible HTTP endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub embedding_model: String,
    pub request_timeout_secs: f64,
    pub retry_limit: u32,
    /// Text inserted between the (augmented) prompt and the response when scoring.
    pub response_separator: String,
    /// Never serialized; read from `EXACT_API_KEY`.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            embedding_model: "default".into(),
            request_timeout_secs: 60.0,
            retry_limit: 2,
            response_separator: "\n".into(),
            api_key: None,
        }
    }
}

impl RemoteConfig {
    /// Applies `EXACT_BASE_URL` and `EXACT_API_KEY` when they are set.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                self.base_url = url;
            }
        }
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs.max(0.001))
    }

    pub(crate) fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }
}
