//! Chat-completion backends over HTTP.
//!
//! Requests go to `POST {base_url}/chat/completions` in the OpenAI wire
//! format. Timeouts, transport errors, 429 and 5xx responses are retried with
//! exponential backoff; other statuses and unparseable bodies fail at once.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use parley_core::prompting::{ChatMessage, PromptBundle};
use parley_core::{Agent, AgentError, TurnRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub base_url: String,
    pub model_name: String,
    /// 0.7 for exploratory runs; set 0 for reproducibility runs.
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    /// Requests in flight at once across all workers.
    pub max_concurrency: usize,
    /// Environment variable holding the bearer token; unset or empty sends
    /// no `Authorization` header.
    pub api_key_env: Option<String>,
    /// Keep every request/response pair in the run transcript.
    pub log_exchanges: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "http://localhost:8000/v1".into(),
            model_name: String::new(),
            temperature: 0.7,
            max_tokens: 512,
            timeout_secs: 60.0,
            max_retries: 2,
            backoff_base_ms: 500,
            backoff_max_ms: 8_000,
            max_concurrency: 4,
            api_key_env: Some(DEFAULT_API_KEY_ENV.into()),
            log_exchanges: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendConfigError {
    #[error("base_url must start with http:// or https://, got {0:?}")]
    BaseUrl(String),
    #[error("model_name is empty")]
    ModelName,
    #[error("timeout_secs must be positive, got {0}")]
    Timeout(f64),
    #[error("temperature must be non-negative, got {0}")]
    Temperature(f64),
    #[error("max_concurrency must be at least 1")]
    Concurrency,
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendConfigError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(BackendConfigError::BaseUrl(self.base_url.clone()));
        }
        if self.model_name.trim().is_empty() {
            return Err(BackendConfigError::ModelName);
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BackendConfigError::Timeout(self.timeout_secs));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendConfigError::Temperature(self.temperature));
        }
        if self.max_concurrency == 0 {
            return Err(BackendConfigError::Concurrency);
        }
        Ok(())
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor).min(self.backoff_max_ms))
    }

    /// Upper bound on the wall time of one [`HttpBackend::complete`] call,
    /// excluding time spent waiting for a concurrency slot.
    pub fn worst_case(&self) -> Duration {
        let timeout = Duration::from_secs_f64(self.timeout_secs);
        let attempts = self.max_retries + 1;
        timeout * attempts + Duration::from_millis(self.backoff_max_ms) * self.max_retries
    }
}

/// One HTTP attempt, as kept in transcripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub turn: u32,
    pub attempt: u32,
    pub request: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// A configured endpoint. Cheap to clone; clones share the concurrency cap.
#[derive(Clone)]
pub struct HttpBackend {
    config: Arc<BackendConfig>,
    http: ureq::Agent,
    api_key: Option<String>,
    limiter: Arc<Limiter>,
}

enum Attempt {
    Done(String),
    Retry(AgentError),
    Fail(AgentError),
}

fn extract_content(body: &str) -> Result<String, String> {
    let value: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "no choices[0].message.content string".into())
}

fn is_timeout(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(io) => matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock),
        _ => false,
    }
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendConfigError> {
        config.validate()?;
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            limiter: Arc::new(Limiter {
                max: config.max_concurrency,
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            }),
            config: Arc::new(config),
            http,
            api_key,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    fn attempt(&self, body: &str, attempts: u32) -> (Attempt, Option<u16>, Option<String>) {
        let mut request = self
            .http
            .post(&self.config.endpoint())
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send(body) {
            Ok(r) => r,
            Err(err) if is_timeout(&err) => return (Attempt::Retry(AgentError::Timeout { attempts }), None, None),
            Err(err) => {
                let detail = err.to_string();
                return (Attempt::Retry(AgentError::Transport { detail, attempts }), None, None);
            }
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(err) if is_timeout(&err) => {
                return (Attempt::Retry(AgentError::Timeout { attempts }), Some(status), None)
            }
            Err(err) => {
                let detail = format!("reading body: {err}");
                return (Attempt::Retry(AgentError::Transport { detail, attempts }), Some(status), None);
            }
        };
        let outcome = match status {
            200..=299 => match extract_content(&text) {
                Ok(content) => Attempt::Done(content),
                Err(detail) => Attempt::Fail(AgentError::MalformedResponse { detail }),
            },
            429 | 500..=599 => Attempt::Retry(AgentError::Status { status, attempts }),
            _ => Attempt::Fail(AgentError::Status { status, attempts }),
        };
        (outcome, Some(status), Some(text))
    }

    /// Sends one prompt and returns the model's text. Makes at most
    /// `max_retries + 1` attempts. `log` receives every attempt.
    pub fn complete_logged(
        &self,
        prompt: &PromptBundle,
        turn: u32,
        log: &mut dyn FnMut(Exchange),
    ) -> Result<Completion, AgentError> {
        let request = self.request_body(&prompt.chat_messages());
        let body = request.to_string();
        let _permit = self.limiter.acquire();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let started = Instant::now();
            let (outcome, status, response) = self.attempt(&body, attempts);
            let error = match &outcome {
                Attempt::Done(_) => None,
                Attempt::Retry(e) | Attempt::Fail(e) => Some(e.to_string()),
            };
            log(Exchange {
                turn,
                attempt: attempts,
                request: request.clone(),
                status,
                response,
                error,
                elapsed_ms: started.elapsed().as_millis() as u64,
            });
            match outcome {
                Attempt::Done(text) => return Ok(Completion { text, attempts }),
                Attempt::Fail(err) => return Err(err),
                Attempt::Retry(err) if attempts > self.config.max_retries => return Err(err),
                Attempt::Retry(err) => {
                    tracing::debug!(attempt = attempts, "retrying after {err}");
                    thread::sleep(self.config.backoff(attempts - 1));
                }
            }
        }
    }

    pub fn complete(&self, prompt: &PromptBundle) -> Result<Completion, AgentError> {
        self.complete_logged(prompt, 0, &mut |_| {})
    }
}

/// An [`Agent`] backed by an [`HttpBackend`]. Keeps the exchanges of the
/// current run when the backend has logging on.
pub struct HttpAgent {
    backend: HttpBackend,
    exchanges: Vec<Exchange>,
}

impl HttpAgent {
    pub fn new(backend: HttpBackend) -> Self {
        HttpAgent {
            backend,
            exchanges: Vec::new(),
        }
    }

    pub fn take_exchanges(&mut self) -> Vec<Exchange> {
        std::mem::take(&mut self.exchanges)
    }
}

impl Agent for HttpAgent {
    fn respond(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError> {
        let keep = self.backend.config.log_exchanges;
        let exchanges = &mut self.exchanges;
        self.backend
            .complete_logged(request.prompt, request.index, &mut |e| {
                if keep {
                    exchanges.push(e);
                }
            })
            .map(|c| c.text)
    }
}
