use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{request_hash, BackendError, ChatBackend, ChatMessage, Completion, Usage};

/// One line of a recording file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub request_hash: String,
    pub messages: Vec<ChatMessage>,
    pub reply: String,
    pub usage: Option<Usage>,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

fn io_err(e: std::io::Error) -> BackendError {
    BackendError::Io(e.to_string())
}

/// Forwards to an inner backend and appends every exchange to a JSONL file.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<File>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: &Path) -> Result<Self, BackendError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        Ok(Self {
            inner,
            sink: Mutex::new(file),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        let completion = self.inner.complete(messages)?;
        let call = RecordedCall {
            request_hash: request_hash(messages),
            messages: messages.to_vec(),
            reply: completion.text.clone(),
            usage: completion.usage,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
        };
        let mut line = serde_json::to_string(&call).map_err(|e| BackendError::Io(e.to_string()))?;
        line.push('\n');
        let mut sink = self.sink.lock().unwrap();
        sink.write_all(line.as_bytes()).map_err(io_err)?;
        sink.flush().map_err(io_err)?;
        Ok(completion)
    }
}

/// Answers from a recording, in order, without touching the network.
///
/// Each request must hash to the same value as the recorded one.
#[derive(Debug)]
pub struct ReplayBackend {
    calls: Mutex<VecDeque<RecordedCall>>,
}

impl ReplayBackend {
    pub fn from_calls(calls: Vec<RecordedCall>) -> Self {
        Self {
            calls: Mutex::new(calls.into()),
        }
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        let mut calls = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            calls.push(
                serde_json::from_str(&line).map_err(|e| BackendError::Decode(e.to_string()))?,
            );
        }
        Ok(Self::from_calls(calls))
    }

    pub fn remaining(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        let mut calls = self.calls.lock().unwrap();
        let found = request_hash(messages);
        let next = calls.front().ok_or(BackendError::ReplayExhausted)?;
        if next.request_hash != found {
            return Err(BackendError::ReplayMismatch {
                expected: next.request_hash.clone(),
                found,
            });
        }
        let call = calls.pop_front().unwrap();
        Ok(Completion {
            text: call.reply,
            usage: call.usage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.jsonl");
        let live =
            RecordingBackend::new(ScriptedBackend::from_replies(["> look", "> exit"]), &path)
                .unwrap();
        let a = [ChatMessage::user("first")];
        let b = [ChatMessage::user("second")];
        assert_eq!(live.complete(&a).unwrap().text, "> look");
        assert_eq!(live.complete(&b).unwrap().text, "> exit");

        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.remaining(), 2);
        assert_eq!(replay.complete(&a).unwrap().text, "> look");
        assert!(matches!(
            replay.complete(&a),
            Err(BackendError::ReplayMismatch { .. })
        ));
        assert_eq!(replay.complete(&b).unwrap().text, "> exit");
        assert_eq!(replay.complete(&b), Err(BackendError::ReplayExhausted));
    }
}
