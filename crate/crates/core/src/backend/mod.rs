//! Chat-completion backends.
//!
//! [`HttpBackend`] talks to any chat-completions-compatible server,
//! [`ScriptedBackend`] replays canned replies for tests, and
//! [`RecordingBackend`] / [`ReplayBackend`] capture and reproduce sessions.

mod http;
mod record;
mod scripted;
mod simulated;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{request_body, BackendConfig, HttpBackend};
pub use record::{RecordedCall, RecordingBackend, ReplayBackend};
pub use scripted::{Reply, ScriptEntry, ScriptedBackend};
pub use simulated::{placement_from_transcript, placements_from_transcript, SimulatedSampler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("server answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("scripted backend has no reply left for this request")]
    ScriptExhausted,
    #[error("replayed request does not match the recording (expected {expected}, got {found})")]
    ReplayMismatch { expected: String, found: String },
    #[error("recording has no more calls to replay")]
    ReplayExhausted,
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
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

/// Token counts as reported by the provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

/// Something that turns a conversation into an assistant reply.
///
/// Implementations must accept concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        (**self).complete(messages)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        (**self).complete(messages)
    }
}

/// Hex SHA-256 of the JSON-serialized message list.
pub fn request_hash(messages: &[ChatMessage]) -> String {
    let json = serde_json::to_vec(messages).expect("messages always serialize");
    hex::encode(Sha256::digest(&json))
}
