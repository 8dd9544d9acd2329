//! Fixed evidence scripts for the inference-only comparison with people.
//!
//! Each training script shows three numbered objects under one kind of
//! evidence; the test trial (objects A, B, C) is shared. Answering that A is
//! a blicket signals a conjunctive reading.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{parse_answer, AgentError};
use crate::backend::{ChatBackend, ChatMessage};
use crate::env::{
    render_initial_observation, Action, BlicketMask, EnvState, ObjectLabels, OpeningVariant,
    Placement, RenderOptions, Rule, Transcript,
};
use crate::prompts::{qa_instruction, PromptStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    DisjunctiveEvidence,
    ConjunctiveEvidence,
    AmbiguousEvidence,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::DisjunctiveEvidence,
        ScenarioKind::ConjunctiveEvidence,
        ScenarioKind::AmbiguousEvidence,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::DisjunctiveEvidence => "disjunctive_evidence",
            ScenarioKind::ConjunctiveEvidence => "conjunctive_evidence",
            ScenarioKind::AmbiguousEvidence => "ambiguous_evidence",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key || k.as_str().split('_').next() == Some(key.as_str()))
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub training_transcript: String,
    pub test_transcript: String,
    pub question: String,
    pub key_object_label: String,
}

impl Scenario {
    /// Single prompt: training evidence, test evidence, then the question.
    pub fn prompt(&self) -> String {
        format!(
            "{}\n\n{}\n\n{}",
            self.training_transcript, self.test_transcript, self.question
        )
    }
}

use Action::{Put, Take};

const DISJUNCTIVE_ACTIONS: [Action; 12] = [
    Put(0),
    Take(0),
    Put(1),
    Take(1),
    Put(2),
    Take(2),
    Put(0),
    Put(1),
    Take(1),
    Put(2),
    Take(0),
    Put(1),
];
const CONJUNCTIVE_ACTIONS: [Action; 12] = [
    Put(0),
    Take(0),
    Put(1),
    Take(1),
    Put(2),
    Take(2),
    Put(0),
    Put(1),
    Take(1),
    Put(2),
    Take(0),
    Put(1),
];
const AMBIGUOUS_ACTIONS: [Action; 12] = [
    Put(0),
    Take(0),
    Put(0),
    Take(0),
    Put(1),
    Take(1),
    Put(1),
    Take(1),
    Put(1),
    Take(1),
    Put(0),
    Put(2),
];
const TEST_ACTIONS: [Action; 12] = [
    Put(0),
    Take(0),
    Put(0),
    Take(0),
    Put(0),
    Take(0),
    Put(1),
    Take(1),
    Put(0),
    Put(2),
    Put(1),
    Take(1),
];

/// Plays `actions` from an all-floor start and returns the transcript.
fn script(
    rule: Rule,
    labels: ObjectLabels,
    opening: OpeningVariant,
    separator: &str,
    actions: &[Action],
) -> String {
    let mask = BlicketMask::from_indices(3, &[0, 2]);
    let mut state =
        EnvState::new(mask, rule, Placement::empty(3), actions.len()).with_render(RenderOptions {
            labels,
            ..RenderOptions::default()
        });
    let mut transcript = Transcript::new(&render_initial_observation(&state, opening), separator);
    for &action in actions {
        let (next, event) = state.apply_action(action).expect("script fits the horizon");
        transcript.push(&event);
        state = next;
    }
    transcript.as_str().trim_end().to_string()
}

/// Training and test transcripts for `kind`, plus the question about A.
pub fn build_scenario(kind: ScenarioKind) -> Scenario {
    let numeric = ObjectLabels::Numeric;
    let training_transcript = match kind {
        ScenarioKind::DisjunctiveEvidence => script(
            Rule::Disjunctive,
            numeric,
            OpeningVariant::Training,
            "\n",
            &DISJUNCTIVE_ACTIONS,
        ),
        ScenarioKind::ConjunctiveEvidence => script(
            Rule::Conjunctive,
            numeric,
            OpeningVariant::Training,
            "\n\n",
            &CONJUNCTIVE_ACTIONS,
        ),
        ScenarioKind::AmbiguousEvidence => script(
            Rule::Conjunctive,
            numeric,
            OpeningVariant::Training,
            "\n\n",
            &AMBIGUOUS_ACTIONS,
        ),
    };
    let test_transcript = script(
        Rule::Conjunctive,
        ObjectLabels::Letters,
        OpeningVariant::Test,
        "\n\n",
        &TEST_ACTIONS,
    );
    Scenario {
        kind,
        training_transcript,
        test_transcript,
        question: format!(
            "Based on the information above, is object A a blicket?\n\n{}",
            qa_instruction(PromptStyle::Default)
        ),
        key_object_label: "A".to_string(),
    }
}

/// Outcome of repeated scenario queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryResult {
    pub kind: ScenarioKind,
    pub repetitions: usize,
    /// Fraction of repetitions answering True.
    pub proportion_true: f64,
    pub answers: Vec<Option<bool>>,
    pub raw_replies: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("scenario battery stopped after {} of {} repetitions: {source}", partial.answers.len(), partial.repetitions)]
pub struct BatteryError {
    pub source: AgentError,
    pub partial: BatteryResult,
}

/// Asks the backend about object A `repetitions` times, each in a fresh
/// context.
pub fn run_scenario_battery<B: ChatBackend + ?Sized>(
    backend: &B,
    kind: ScenarioKind,
    repetitions: usize,
) -> Result<BatteryResult, BatteryError> {
    assert!(repetitions >= 1, "at least one repetition");
    let scenario = build_scenario(kind);
    let messages = [ChatMessage::user(scenario.prompt())];
    let mut result = BatteryResult {
        kind,
        repetitions,
        proportion_true: 0.0,
        answers: Vec::with_capacity(repetitions),
        raw_replies: Vec::with_capacity(repetitions),
    };
    for _ in 0..repetitions {
        match backend.complete(&messages) {
            Ok(completion) => {
                result.answers.push(parse_answer(&completion.text));
                result.raw_replies.push(completion.text);
            }
            Err(e) => {
                result.proportion_true = proportion_true(&result.answers);
                return Err(BatteryError {
                    source: e.into(),
                    partial: result,
                });
            }
        }
    }
    result.proportion_true = proportion_true(&result.answers);
    Ok(result)
}

fn proportion_true(answers: &[Option<bool>]) -> f64 {
    if answers.is_empty() {
        return 0.0;
    }
    answers.iter().filter(|a| **a == Some(true)).count() as f64 / answers.len() as f64
}
