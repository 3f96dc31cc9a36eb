use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ChatClient, ChatMessage, ChatRequest, ChatResponse, ClientError, Usage};

pub const ENV_ENDPOINT: &str = "CRAFTSIM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "CRAFTSIM_LLM_API_KEY";
pub const ENV_MODEL: &str = "CRAFTSIM_LLM_MODEL";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL, e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1".into(),
            api_key: None,
            model: "gpt-3.5-turbo".into(),
            timeout_secs: 60,
            max_retries: 3,
            backoff_ms: 500,
        }
    }
}

impl HttpConfig {
    pub fn from_env() -> Self {
        let mut cfg = HttpConfig::default();
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            cfg.endpoint = e;
        }
        if let Ok(m) = std::env::var(ENV_MODEL) {
            cfg.model = m;
        }
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        cfg
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking client for `/chat/completions` endpoints.
pub struct HttpChatClient {
    cfg: HttpConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(cfg: HttpConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ClientError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpChatClient { cfg, http })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.cfg.endpoint.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, Attempt> {
        let mut call = self.http.post(self.url()).json(body);
        if let Some(key) = &self.cfg.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("status {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ClientError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        Ok(text)
    }
}

enum Attempt {
    Retry(String),
    Fatal(ClientError),
}

impl ChatClient for HttpChatClient {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        req.validate()?;
        let model = if req.model.is_empty() {
            self.cfg.model.as_str()
        } else {
            req.model.as_str()
        };
        let body = WireRequest {
            model,
            messages: &req.messages,
            temperature: req.temperature,
            top_p: req.top_p,
            max_tokens: req.max_tokens,
        };
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1));
                log::warn!("retrying completion (attempt {attempt}) after {wait} ms: {last}");
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(&body) {
                Ok(text) => {
                    let wire: WireResponse = serde_json::from_str(&text)
                        .map_err(|e| ClientError::Malformed(e.to_string()))?;
                    let content = wire
                        .choices
                        .into_iter()
                        .next()
                        .and_then(|c| c.message.content)
                        .ok_or_else(|| ClientError::Malformed("no message content".into()))?;
                    return Ok(ChatResponse {
                        content,
                        usage: wire.usage,
                        latency: started.elapsed(),
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(ClientError::Transport {
            attempts: self.cfg.max_retries + 1,
            message: last,
        })
    }
}
