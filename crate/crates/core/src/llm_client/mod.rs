//! Chat-completion clients: a live OpenAI-compatible HTTP client, a scripted
//! client replaying a recorded transcript, and a recorder wrapping any client.

mod http;
mod offline;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpChatClient, HttpConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use offline::HeuristicClient;
pub use scripted::{
    record_transcript, replay_transcript, RecordingClient, ScriptedClient, Transcript,
    TranscriptEntry,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    fn hash(&self) -> String {
        crate::util::sha256_hex(format!("{}\0{}", self.role.as_str(), self.content).as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub model: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.messages.is_empty() {
            return Err(ClientError::InvalidRequest("no messages".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ClientError::InvalidRequest(format!(
                "temperature {} must be non-negative",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ClientError::InvalidRequest(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        Ok(())
    }

    /// Stable hash over roles and contents only; sampling parameters and the
    /// model name do not change what was asked.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        for m in &self.messages {
            buf.extend_from_slice(m.role.as_str().as_bytes());
            buf.push(0);
            buf.extend_from_slice(m.content.as_bytes());
            buf.push(0);
        }
        crate::util::sha256_hex(&buf)
    }

    pub fn message_hashes(&self) -> Vec<String> {
        self.messages.iter().map(ChatMessage::hash).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Option<Usage>,
    pub latency: Duration,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion: {0}")]
    Malformed(String),
    #[error(
        "transcript mismatch at call {call}: expected fingerprint {expected}, got {actual}{}",
        .divergence.as_deref().map(|d| format!("; {d}")).unwrap_or_default()
    )]
    TranscriptMismatch {
        call: usize,
        expected: String,
        actual: String,
        divergence: Option<String>,
    },
    #[error("transcript exhausted after {calls} calls")]
    TranscriptExhausted { calls: usize },
    #[error("transcript line {line}: {message}")]
    TranscriptFormat { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One completion per call. Implementations may be shared across threads.
pub trait ChatClient: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for std::sync::Arc<C> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        (**self).complete(req)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        (**self).complete(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(temp: f64) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::system("rules"), ChatMessage::user("state")],
            temperature: temp,
            top_p: 1.0,
            max_tokens: 64,
            model: "m".into(),
        }
    }

    #[test]
    fn fingerprint_ignores_sampling() {
        let mut b = req(0.2);
        b.top_p = 0.5;
        b.model = "other".into();
        assert_eq!(req(1.0).fingerprint(), b.fingerprint());
        let mut c = req(1.0);
        c.messages[1].content.push('!');
        assert_ne!(req(1.0).fingerprint(), c.fingerprint());
    }

    #[test]
    fn fingerprint_separates_roles() {
        let mut a = req(1.0);
        a.messages[1].role = Role::Assistant;
        assert_ne!(a.fingerprint(), req(1.0).fingerprint());
    }

    #[test]
    fn validation() {
        assert!(req(1.0).validate().is_ok());
        assert!(req(-0.1).validate().is_err());
        let mut r = req(1.0);
        r.top_p = 0.0;
        assert!(r.validate().is_err());
        r.top_p = 1.0;
        r.messages.clear();
        assert!(r.validate().is_err());
    }
}
