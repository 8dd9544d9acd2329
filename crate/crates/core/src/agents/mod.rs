//! Decision policies: the information-gain oracle, random and count-based
//! baselines, fixed-sequence replay, a chat-model agent and the
//! hypothesis-sampling agent.

mod baseline;
mod chat;
mod oracle;
mod sampling;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::env::{Action, ObjectLabels, Placement};
use crate::hypothesis::{HypothesisError, ObservationPair};

pub use baseline::{
    count_based_step, random_step, CountBasedAgent, CountMode, PerturbationCounts, RandomAgent,
    ReplayAgent,
};
pub use chat::{ChatAgent, ChatAgentConfig};
pub use oracle::{oracle_answer, oracle_step, OracleAgent};
pub use sampling::{
    render_hypothesis_list, sample_hypotheses, SamplingAgent, SamplingAgentState, SamplingConfig,
    SamplingRound,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
}

/// What a backend call was for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Action,
    Generate,
    Answer,
}

/// Verbatim backend reply, kept for logging and response-length metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOutput {
    pub kind: OutputKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDecision {
    pub action: Action,
    /// Raw reply the action was parsed from, if any.
    pub rationale_text: Option<String>,
    pub raw_outputs: Vec<RawOutput>,
    /// Replies that did not parse as a command.
    pub parse_failures: usize,
}

impl AgentDecision {
    pub fn new(action: Action) -> Self {
        Self {
            action,
            rationale_text: None,
            raw_outputs: Vec::new(),
            parse_failures: 0,
        }
    }
}

/// Everything an agent may look at when choosing an action.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub transcript: &'a str,
    pub placement: Placement,
    /// The initial observation followed by one pair per event.
    pub observations: &'a [ObservationPair],
    pub step: usize,
    pub horizon: usize,
    pub labels: ObjectLabels,
}

impl StepContext<'_> {
    pub fn num_objects(&self) -> usize {
        self.placement.len()
    }
}

/// Context for one Q&A question.
#[derive(Debug, Clone, Copy)]
pub struct QaContext<'a> {
    pub transcript: &'a str,
    pub observations: &'a [ObservationPair],
    pub num_objects: usize,
    pub object: usize,
    pub labels: ObjectLabels,
}

/// A Q&A reply. `value` is `None` when the reply never parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub value: Option<bool>,
    pub raw_outputs: Vec<RawOutput>,
}

impl Answer {
    pub fn known(value: bool) -> Self {
        Self {
            value: Some(value),
            raw_outputs: Vec::new(),
        }
    }
}

/// A policy driving one trial.
pub trait Agent: Send {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError>;

    fn answer(&mut self, ctx: &QaContext<'_>) -> Result<Answer, AgentError>;

    /// Sampling rounds so far, for agents that sample hypotheses.
    fn sampling_rounds(&self) -> Option<&[SamplingRound]> {
        None
    }
}

static ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)>\s*\**\s*(true|false)\b").unwrap());

/// Last `> True` / `> False` in a reply, case-insensitive.
pub fn parse_answer(text: &str) -> Option<bool> {
    ANSWER
        .captures_iter(text)
        .last()
        .map(|c| c[1].eq_ignore_ascii_case("true"))
}
