use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::dsl::{extract_hypotheses, render_hypothesis};
use crate::env::{ObjectLabels, Placement};
use crate::hypothesis::{Hypothesis, HypothesisSpace};

use super::{BackendError, ChatBackend, ChatMessage, Completion};

static INITIAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"object (\w+) is on the (floor|machine)").unwrap());
static COMMAND: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^> (put|take) object (\w+) (?:on|off)").unwrap());
static REQUESTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Produce (\d+) hypothesis").unwrap());
static QUESTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Is object (\w+) a blicket\?").unwrap());

const ACTIVE_HEADER: &str = "You have not yet disproven the following hypothesis:";

/// Deterministic stand-in for a model driving the hypothesis-sampling agent.
///
/// Proposes hypotheses from a fixed pool (skipping any already listed in the
/// prompt), picks the single move that best splits the listed hypotheses
/// (or, with nothing to split, one that reaches an unvisited placement), and
/// answers from the listed active set. Anything else gets `> look`.
#[derive(Debug, Clone)]
pub struct SimulatedSampler {
    num_objects: usize,
    pool: Vec<Hypothesis>,
}

impl SimulatedSampler {
    pub fn new(num_objects: usize, pool: Vec<Hypothesis>) -> Self {
        Self { num_objects, pool }
    }

    /// Pool covering the whole hypothesis space in canonical order.
    pub fn full_space(space: HypothesisSpace) -> Self {
        Self::new(space.num_objects(), space.iter().collect())
    }

    fn generate(&self, prompt: &str) -> String {
        let known: HashSet<Hypothesis> = extract_hypotheses(prompt, self.num_objects)
            .into_iter()
            .collect();
        let wanted = REQUESTED
            .captures(prompt)
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(usize::MAX);
        let lines: Vec<String> = self
            .pool
            .iter()
            .filter(|h| !known.contains(h))
            .take(wanted)
            .map(render_hypothesis)
            .collect();
        if lines.is_empty() {
            "I cannot think of any other hypothesis.".to_string()
        } else {
            lines.join("\n")
        }
    }

    fn act(&self, prompt: &str) -> String {
        let active = extract_hypotheses(prompt, self.num_objects);
        let Some(visited) = placements_from_transcript(prompt, self.num_objects) else {
            return "> look".to_string();
        };
        let placement = *visited.last().expect("opening placement");
        let split = |p: &Placement| {
            let on = active.iter().filter(|h| h.predict(p)).count();
            on.min(active.len() - on)
        };
        let best = (0..self.num_objects)
            .map(|i| (split(&placement.toggled(i)), i))
            .filter(|&(s, _)| s > 0)
            .min_by_key(|&(s, i)| (std::cmp::Reverse(s), i))
            .map(|(_, i)| i);
        let object = best.or_else(|| {
            // Step toward the closest placement that separates anything.
            (0..1u32 << self.num_objects)
                .map(|bits| Placement::from_bits(self.num_objects, bits))
                .filter(|p| split(p) > 0)
                .min_by_key(|p| (p.hamming(&placement), p.bits()))
                .and_then(|goal| (0..self.num_objects).find(|&i| goal.get(i) != placement.get(i)))
        });
        // Nothing left to separate: test the listed hypotheses somewhere new.
        let object = object
            .or_else(|| (0..self.num_objects).find(|&i| !visited.contains(&placement.toggled(i))));
        match object {
            Some(i) if placement.get(i) => format!("> take object {i} off machine"),
            Some(i) => format!("> put object {i} on machine"),
            None => "> look".to_string(),
        }
    }

    fn answer(&self, prompt: &str) -> String {
        let active_text = prompt
            .split_once(ACTIVE_HEADER)
            .map(|(_, rest)| rest)
            .unwrap_or_default();
        let active = extract_hypotheses(active_text, self.num_objects);
        let object = QUESTION
            .captures_iter(prompt)
            .last()
            .and_then(|c| ObjectLabels::index_of(&c[1]));
        let yes = match object {
            Some(i) => !active.is_empty() && active.iter().all(|h| h.mask.get(i)),
            None => false,
        };
        format!("> {}", if yes { "True" } else { "False" })
    }
}

/// Current placement implied by a transcript: the opening description,
/// then every put/take command in order.
pub fn placement_from_transcript(transcript: &str, num_objects: usize) -> Option<Placement> {
    placements_from_transcript(transcript, num_objects).and_then(|v| v.last().copied())
}

/// Opening placement followed by the placement after each put/take command.
pub fn placements_from_transcript(transcript: &str, num_objects: usize) -> Option<Vec<Placement>> {
    let mut placement = Placement::empty(num_objects);
    let mut seen = 0;
    for c in INITIAL.captures_iter(transcript).take(num_objects) {
        let i = ObjectLabels::index_of(&c[1]).filter(|&i| i < num_objects)?;
        placement = placement.with(i, &c[2] == "machine");
        seen += 1;
    }
    if seen < num_objects {
        return None;
    }
    let mut visited = vec![placement];
    for c in COMMAND.captures_iter(transcript) {
        if let Some(i) = ObjectLabels::index_of(&c[2]).filter(|&i| i < num_objects) {
            placement = placement.with(i, &c[1] == "put");
            visited.push(placement);
        }
    }
    Some(visited)
}

impl ChatBackend for SimulatedSampler {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        let prompt = messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let text = if prompt.contains("Come up with some hypothesis") {
            self.generate(prompt)
        } else if prompt.contains("take an action which will disprove") {
            self.act(prompt)
        } else if prompt.contains("answer the following question") {
            self.answer(prompt)
        } else {
            "> look".to_string()
        };
        Ok(Completion::text(text))
    }
}
