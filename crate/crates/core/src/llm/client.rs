//! OpenAI-compatible chat-completion client with retry and exponential
//! backoff.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LlmError;

/// Overrides [`LlmEndpointConfig::api_key`] when set.
pub const API_KEY_ENV: &str = "TRLLM_API_KEY";

/// Anything that turns a single user prompt into assistant text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model_name: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff_base_secs: f64,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "http://localhost:11434/v1".into(),
            model_name: "llama3.2".into(),
            api_key: None,
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_base_secs: 1.0,
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(LlmError::Config("backoff base must be non-negative".into()));
        }
        reqwest::Url::parse(&self.base_url).map_err(|e| LlmError::Config(format!("base_url: {e}")))?;
        Ok(())
    }

    /// Key from the environment, falling back to the configured one.
    pub fn resolved_api_key(&self) -> Option<String> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .or_else(|| self.api_key.clone())
    }

    pub fn endpoint_url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_secs * 2f64.powi(retry as i32))
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
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
    content: Option<String>,
}

/// Extracts `choices[0].message.content` from a chat-completions body.
pub fn parse_chat_response(body: &str) -> Result<String, LlmError> {
    let value: Value = serde_json::from_str(body).map_err(|e| LlmError::Protocol(format!("response is not JSON: {e}")))?;
    let parsed: ChatResponse =
        serde_json::from_value(value).map_err(|e| LlmError::Protocol(format!("unexpected response shape: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::Protocol("response has no choices[0].message.content".into()))
}

enum Attempt {
    Done(String),
    Retry(String),
}

/// POSTs JSON to an OpenAI-compatible endpoint, retrying transport failures,
/// HTTP 429 and 5xx with exponential backoff. Shared by the chat and
/// embedding clients.
pub struct RetryingPoster {
    cfg: LlmEndpointConfig,
    http: reqwest::blocking::Client,
}

impl RetryingPoster {
    pub fn new(cfg: LlmEndpointConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(RetryingPoster { cfg, http })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.cfg
    }

    fn attempt<B: Serialize>(&self, url: &str, body: &B) -> Result<Attempt, LlmError> {
        let mut req = self.http.post(url).json(body);
        if let Some(key) = self.cfg.resolved_api_key() {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading body: {e}"))),
        };
        if status.is_success() {
            return Ok(Attempt::Done(text));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Ok(Attempt::Retry(format!("HTTP {status}")));
        }
        Err(LlmError::Request {
            status: status.as_u16(),
            body: text.chars().take(500).collect(),
        })
    }

    /// Body of the first successful response to `base_url + path`.
    pub fn post<B: Serialize>(&self, path: &str, body: &B) -> Result<String, LlmError> {
        let url = self.cfg.endpoint_url(path);
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff(attempt - 1);
                debug!("retry {attempt}/{} in {delay:?}", self.cfg.max_retries);
                thread::sleep(delay);
            }
            match self.attempt(&url, body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(why) => {
                    warn!("{path} attempt {} failed: {why}", attempt + 1);
                    last = why;
                }
            }
        }
        Err(LlmError::Transport { attempts, message: last })
    }
}

pub struct HttpChatClient {
    poster: RetryingPoster,
}

impl HttpChatClient {
    pub fn new(cfg: LlmEndpointConfig) -> Result<Self, LlmError> {
        Ok(HttpChatClient {
            poster: RetryingPoster::new(cfg)?,
        })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        self.poster.config()
    }
}

impl ChatBackend for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let cfg = self.poster.config();
        let body = ChatRequest {
            model: &cfg.model_name,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: cfg.temperature,
        };
        parse_chat_response(&self.poster.post("/chat/completions", &body)?)
    }
}
