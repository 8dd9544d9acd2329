use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatMessage, Completion};

type ReplyFn = dyn Fn(&[ChatMessage]) -> String + Send + Sync;

/// What a script entry answers with.
#[derive(Clone)]
pub enum Reply {
    Text(String),
    /// Computed from the request; used by tests that need an adaptive
    /// stand-in for a model.
    Computed(Arc<ReplyFn>),
}

impl fmt::Debug for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reply::Text(t) => f.debug_tuple("Text").field(t).finish(),
            Reply::Computed(_) => f.write_str("Computed(..)"),
        }
    }
}

/// One line of a script: an optional substring that must occur in the last
/// message, the reply, and whether the entry stays after being used.
#[derive(Debug, Clone)]
pub struct ScriptEntry {
    pub matcher: Option<String>,
    pub reply: Reply,
    pub repeat: bool,
}

/// On-disk form of a script entry (text replies only).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptFileEntry {
    #[serde(default)]
    matcher: Option<String>,
    reply: String,
    #[serde(default)]
    repeat: bool,
}

/// Deterministic backend answering from a fixed script.
///
/// Each call uses the first entry whose matcher occurs in the last message
/// (entries without a matcher match everything). Non-repeating entries are
/// removed once used. Calls are serialized internally.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    entries: Mutex<Vec<ScriptEntry>>,
    calls: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries: Mutex::new(entries),
            calls: Mutex::new(0),
        }
    }

    /// Replies popped in order, one per call.
    pub fn from_replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        replies.into_iter().fold(Self::new(), |b, r| b.then(r))
    }

    /// Parses a JSON array of `{"matcher": .., "reply": .., "repeat": ..}`.
    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptFileEntry> =
            serde_json::from_str(json).map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self::from_entries(
            entries
                .into_iter()
                .map(|e| ScriptEntry {
                    matcher: e.matcher,
                    reply: Reply::Text(e.reply),
                    repeat: e.repeat,
                })
                .collect(),
        ))
    }

    fn push(self, entry: ScriptEntry) -> Self {
        self.entries.lock().unwrap().push(entry);
        self
    }

    /// Next unconditional, single-use reply.
    pub fn then(self, reply: impl Into<String>) -> Self {
        self.push(ScriptEntry {
            matcher: None,
            reply: Reply::Text(reply.into()),
            repeat: false,
        })
    }

    /// Reply used every time `matcher` occurs in the last message.
    pub fn route(self, matcher: impl Into<String>, reply: impl Into<String>) -> Self {
        self.push(ScriptEntry {
            matcher: Some(matcher.into()),
            reply: Reply::Text(reply.into()),
            repeat: true,
        })
    }

    /// Computed reply used every time `matcher` matches (or always).
    pub fn route_fn<F>(self, matcher: Option<&str>, f: F) -> Self
    where
        F: Fn(&[ChatMessage]) -> String + Send + Sync + 'static,
    {
        self.push(ScriptEntry {
            matcher: matcher.map(str::to_string),
            reply: Reply::Computed(Arc::new(f)),
            repeat: true,
        })
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        *self.calls.lock().unwrap() += 1;
        let last = messages.last().map_or("", |m| m.content.as_str());
        let mut entries = self.entries.lock().unwrap();
        let position = entries
            .iter()
            .position(|e| e.matcher.as_deref().is_none_or(|m| last.contains(m)))
            .ok_or(BackendError::ScriptExhausted)?;
        let reply = if entries[position].repeat {
            entries[position].reply.clone()
        } else {
            entries.remove(position).reply
        };
        drop(entries);
        let text = match reply {
            Reply::Text(t) => t,
            Reply::Computed(f) => f(messages),
        };
        Ok(Completion::text(text))
    }
}
