//! Blocking clients for OpenAI-compatible `/completions` and `/embeddings`
//! endpoints.
//!
//! Scoring sends `augmented prompt + separator + response` with `echo: true,
//! logprobs: 0, max_tokens: 0` and sums the echoed log-probs of tokens whose
//! `text_offset` lies inside the response. Chat-template tokens are never
//! added, so only response tokens are scored.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::attribute::{AttributeId, AttributeLibrary};
use crate::backend::{BackendError, RemoteConfig};
use crate::inference::{augment_prompt, DecodingParams, Generator};
use crate::retrieval::{normalize, Embedder};
use crate::scoring::{LogProbScore, Scorer};

/// Recorded in reports so readers know which tokens were summed.
pub const SCORED_REGION: &str = "response tokens only; no chat template";

const BACKOFF_BASE: Duration = Duration::from_millis(100);

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Shared HTTP plumbing: auth, in-flight cap, retries with exponential backoff.
struct Client {
    config: RemoteConfig,
    http: reqwest::blocking::Client,
    inflight: Semaphore,
}

impl Client {
    fn new(config: RemoteConfig, max_in_flight: usize) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| BackendError::Unavailable(format!("cannot build HTTP client: {e}")))?;
        Ok(Self { config, http, inflight: Semaphore::new(max_in_flight) })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.config.endpoint(path);
        let _permit = self.inflight.acquire();
        let mut last = String::new();
        for attempt in 0..=self.config.retry_limit {
            if attempt > 0 {
                thread::sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            let mut req = self.http.post(&url).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<Value>().map_err(|e| BackendError::Protocol(format!("{url}: {e}")));
                    }
                    let text = resp.text().unwrap_or_default();
                    last = format!("{url}: HTTP {status}: {text}");
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(BackendError::Protocol(last));
                    }
                }
                Err(e) => last = format!("{url}: {e}"),
            }
        }
        Err(BackendError::Unavailable(last))
    }
}

#[derive(Deserialize)]
struct EchoLogprobs {
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Vec<usize>,
}

/// Sums log-probs of tokens starting at or after character `start`.
fn sum_response_logprobs(body: &Value, start: usize) -> Result<LogProbScore, BackendError> {
    let lp = body
        .pointer("/choices/0/logprobs")
        .filter(|v| !v.is_null())
        .ok_or_else(|| BackendError::Protocol("response has no echoed logprobs".into()))?;
    let lp: EchoLogprobs =
        serde_json::from_value(lp.clone()).map_err(|e| BackendError::Protocol(format!("bad logprobs: {e}")))?;
    if lp.token_logprobs.len() != lp.text_offset.len() {
        return Err(BackendError::Protocol("token_logprobs and text_offset differ in length".into()));
    }
    let mut value = 0.0;
    let mut token_count = 0;
    for (lp, offset) in lp.token_logprobs.iter().zip(&lp.text_offset) {
        if *offset < start {
            continue;
        }
        let lp = lp.ok_or_else(|| BackendError::Protocol(format!("missing logprob at offset {offset}")))?;
        if !lp.is_finite() {
            return Err(BackendError::Protocol(format!("non-finite logprob at offset {offset}")));
        }
        value += lp;
        token_count += 1;
    }
    if token_count == 0 {
        return Err(BackendError::Protocol("no response tokens in echoed logprobs".into()));
    }
    Ok(LogProbScore { value, token_count })
}

/// Remote log π(y | x, A) via prompt echo.
pub struct RemoteScorer {
    client: Client,
    library: AttributeLibrary,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig, library: AttributeLibrary, max_in_flight: usize) -> Result<Self, BackendError> {
        Ok(Self { client: Client::new(config, max_in_flight)?, library })
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, prompt: &str, subset: &[AttributeId], response: &str) -> Result<LogProbScore, BackendError> {
        if prompt.is_empty() || response.is_empty() {
            return Err(BackendError::InvalidInput("prompt and response must be non-empty".into()));
        }
        let augmented =
            augment_prompt(prompt, subset, &self.library).map_err(|e| BackendError::InvalidInput(e.to_string()))?;
        let prefix = format!("{augmented}{}", self.client.config.response_separator);
        let body = json!({
            "model": self.client.config.model,
            "prompt": format!("{prefix}{response}"),
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
        });
        let reply = self.client.post("completions", &body)?;
        sum_response_logprobs(&reply, prefix.chars().count())
    }

    fn deterministic(&self) -> bool {
        false
    }
}

/// Remote embeddings, L2-normalized locally.
pub struct RemoteEmbedder {
    client: Client,
    dim: usize,
}

impl RemoteEmbedder {
    /// Probes the endpoint once to learn the embedding dimension.
    pub fn connect(config: RemoteConfig, max_in_flight: usize) -> Result<Self, BackendError> {
        let mut me = Self { client: Client::new(config, max_in_flight)?, dim: 0 };
        let probe = me.request(&["dimension probe"])?;
        me.dim = probe[0].len();
        if me.dim < 2 {
            return Err(BackendError::Protocol(format!("endpoint returned dimension {}", me.dim)));
        }
        Ok(me)
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        let body = json!({ "model": self.client.config.embedding_model, "input": texts });
        let reply = self.client.post("embeddings", &body)?;
        let data = reply
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Protocol("embeddings response has no data array".into()))?;
        if data.len() != texts.len() {
            return Err(BackendError::Protocol(format!("asked for {} embeddings, got {}", texts.len(), data.len())));
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let raw: Vec<f64> = item
                .get("embedding")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .ok_or_else(|| BackendError::Protocol("embedding is not a number array".into()))?;
            let v = normalize(&raw).ok_or_else(|| BackendError::Protocol("zero or non-finite embedding".into()))?;
            *out.get_mut(idx).ok_or_else(|| BackendError::Protocol(format!("embedding index {idx} out of range")))? = v;
        }
        Ok(out)
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(BackendError::InvalidInput("cannot embed an empty prompt".into()));
        }
        let out = self.request(texts)?;
        if let Some(v) = out.iter().find(|v| v.len() != self.dim) {
            return Err(BackendError::Protocol(format!("dimension changed from {} to {}", self.dim, v.len())));
        }
        Ok(out)
    }
}

/// Text generation through `/completions`.
pub struct RemoteGenerator {
    client: Client,
}

impl RemoteGenerator {
    pub fn new(config: RemoteConfig, max_in_flight: usize) -> Result<Self, BackendError> {
        Ok(Self { client: Client::new(config, max_in_flight)? })
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let body = json!({
            "model": self.client.config.model,
            "prompt": prompt,
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "top_k": params.top_k,
        });
        let reply = self.client.post("completions", &body)?;
        reply
            .pointer("/choices/0/text")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Protocol("completion has no text".into()))
    }
}
