use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::backend::{ChatBackend, ChatMessage};
use crate::dsl::{extract_hypotheses, render_hypothesis};
use crate::hypothesis::{Hypothesis, ObservationPair};
use crate::prompts::{shipped_template, system_message, SystemVariant};

use super::chat::{raw, request_action, request_answer};
use super::{
    Agent, AgentDecision, AgentError, Answer, OutputKind, QaContext, RawOutput, StepContext,
};
use crate::env::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Size the active set is refilled towards.
    pub target_sample_count: usize,
    /// Generation calls allowed per refill.
    pub call_budget: usize,
    pub max_parse_retries: usize,
    pub system_variant: SystemVariant,
    pub horizon: usize,
    /// Actions spent trying to disprove a resolved active set before exiting.
    pub verification_steps: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            target_sample_count: 16,
            call_budget: 3,
            max_parse_retries: 2,
            system_variant: SystemVariant::HumanDefault,
            horizon: 32,
            verification_steps: 8,
        }
    }
}

/// Uniform belief over a set of sampled hypotheses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SamplingAgentState {
    pub active: Vec<Hypothesis>,
    pub eliminated: Vec<Hypothesis>,
    pub target_sample_count: usize,
}

fn consistent(h: &Hypothesis, observations: &[ObservationPair]) -> bool {
    observations
        .iter()
        .all(|o| h.predict(&o.placement) == o.light_on)
}

impl SamplingAgentState {
    pub fn new(target_sample_count: usize) -> Self {
        Self {
            active: Vec::new(),
            eliminated: Vec::new(),
            target_sample_count,
        }
    }

    pub fn is_known(&self, h: &Hypothesis) -> bool {
        self.active.contains(h) || self.eliminated.contains(h)
    }

    /// Entropy of the uniform distribution over `active`, in bits.
    pub fn entropy(&self) -> Option<f64> {
        (!self.active.is_empty()).then(|| (self.active.len() as f64).log2())
    }

    /// Moves every active hypothesis that mispredicts some observation to
    /// `eliminated`; returns how many moved.
    pub fn eliminate(&mut self, observations: &[ObservationPair]) -> usize {
        let (keep, drop): (Vec<_>, Vec<_>) = self
            .active
            .drain(..)
            .partition(|h| consistent(h, observations));
        self.active = keep;
        let moved = drop.len();
        self.eliminated.extend(drop);
        moved
    }

    /// Nonempty and all members compute the same function.
    pub fn is_resolved(&self) -> bool {
        match self.active.split_first() {
            None => false,
            Some((first, rest)) => rest.iter().all(|h| h.same_function(first)),
        }
    }

    fn distinct_functions(&self) -> usize {
        self.active
            .iter()
            .map(|h| h.function_key())
            .collect::<HashSet<_>>()
            .len()
    }
}

/// What one refill did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRound {
    /// Environment step at which the refill happened.
    pub step: usize,
    pub calls: usize,
    pub proposed: usize,
    pub duplicates: usize,
    pub inconsistent: usize,
    /// `|active|` after each accepted sample.
    pub active_sizes: Vec<usize>,
    pub active_size: usize,
    pub entropy_bits: Option<f64>,
}

/// Rendered hypotheses one per line, or `None` for an empty list.
pub fn render_hypothesis_list(hypotheses: &[Hypothesis]) -> String {
    if hypotheses.is_empty() {
        return "None".to_string();
    }
    hypotheses
        .iter()
        .map(render_hypothesis)
        .collect::<Vec<_>>()
        .join("\n")
}

fn history_text(transcript: &str) -> String {
    transcript.trim_end().to_string()
}

/// Asks the backend for new hypotheses until `target_sample_count` are active
/// or `call_budget` calls were spent.
///
/// Samples already seen are rejected; samples contradicted by
/// `observations` go straight to `eliminated`.
#[allow(clippy::too_many_arguments)]
pub fn sample_hypotheses<B: ChatBackend + ?Sized>(
    state: &mut SamplingAgentState,
    history: &str,
    observations: &[ObservationPair],
    backend: &B,
    system: &str,
    num_objects: usize,
    call_budget: usize,
    step: usize,
) -> Result<(SamplingRound, Vec<RawOutput>), AgentError> {
    let template = shipped_template("sampling_generate").expect("shipped");
    let mut round = SamplingRound {
        step,
        calls: 0,
        proposed: 0,
        duplicates: 0,
        inconsistent: 0,
        active_sizes: Vec::new(),
        active_size: state.active.len(),
        entropy_bits: state.entropy(),
    };
    let mut outputs = Vec::new();
    while state.active.len() < state.target_sample_count && round.calls < call_budget {
        let requested = state.target_sample_count - state.active.len();
        let bindings = HashMap::from([
            ("HISTORY", history_text(history)),
            ("NUM_OBJECTS", num_objects.to_string()),
            ("NUM_HYPOTHESES", requested.to_string()),
            (
                "ELIMINATED_HYPOTHESES",
                render_hypothesis_list(&state.eliminated),
            ),
            ("ACTIVE_HYPOTHESES", render_hypothesis_list(&state.active)),
        ]);
        let prompt = template.instantiate(&bindings).expect("bindings complete");
        let completion = backend.complete(&[
            ChatMessage::system(system.to_string()),
            ChatMessage::user(prompt),
        ])?;
        round.calls += 1;
        outputs.push(raw(OutputKind::Generate, &completion));
        for h in extract_hypotheses(&completion.text, num_objects) {
            round.proposed += 1;
            if state.active.len() >= state.target_sample_count {
                break;
            }
            if state.is_known(&h) {
                round.duplicates += 1;
            } else if !consistent(&h, observations) {
                round.inconsistent += 1;
                state.eliminated.push(h);
            } else {
                state.active.push(h);
                round.active_sizes.push(state.active.len());
            }
        }
    }
    if state.active.len() < state.target_sample_count {
        debug!(
            active = state.active.len(),
            target = state.target_sample_count,
            "sampling budget exhausted below target"
        );
    }
    round.active_size = state.active.len();
    round.entropy_bits = state.entropy();
    Ok((round, outputs))
}

/// Builds a flat prior from sampled hypotheses and asks the backend for
/// actions that eliminate them.
pub struct SamplingAgent<B> {
    backend: B,
    config: SamplingConfig,
    state: SamplingAgentState,
    system: String,
    rounds: Vec<SamplingRound>,
    probes: usize,
}

impl<B: ChatBackend> SamplingAgent<B> {
    pub fn new(backend: B, config: SamplingConfig) -> Self {
        Self {
            backend,
            state: SamplingAgentState::new(config.target_sample_count),
            system: system_message(config.system_variant, config.horizon),
            config,
            rounds: Vec::new(),
            probes: 0,
        }
    }

    pub fn state(&self) -> &SamplingAgentState {
        &self.state
    }
}

impl<B: ChatBackend> Agent for SamplingAgent<B> {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        let n = ctx.num_objects();
        self.state.eliminate(ctx.observations);
        let mut outputs = Vec::new();
        if self.state.distinct_functions() < 2 {
            let (round, raw) = sample_hypotheses(
                &mut self.state,
                ctx.transcript,
                ctx.observations,
                &self.backend,
                &self.system,
                n,
                self.config.call_budget,
                ctx.step,
            )?;
            self.rounds.push(round);
            outputs = raw;
        }
        let resolved = self.state.is_resolved();
        if resolved {
            self.probes += 1;
        }
        if self.state.active.is_empty()
            || (resolved && self.probes > self.config.verification_steps)
        {
            let mut decision = AgentDecision::new(Action::Exit);
            decision.raw_outputs = outputs;
            return Ok(decision);
        }
        let template = shipped_template("sampling_act").expect("shipped");
        let prompt = template
            .instantiate(&HashMap::from([
                (
                    "ACTIVE_HYPOTHESES",
                    render_hypothesis_list(&self.state.active),
                ),
                ("HISTORY", history_text(ctx.transcript)),
            ]))
            .expect("bindings complete");
        let messages = [
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(prompt),
        ];
        let mut decision =
            request_action(&self.backend, &messages, n, self.config.max_parse_retries)?;
        outputs.append(&mut decision.raw_outputs);
        decision.raw_outputs = outputs;
        Ok(decision)
    }

    fn answer(&mut self, ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        self.state.eliminate(ctx.observations);
        let template = shipped_template("sampling_answer").expect("shipped");
        let question = format!("Is object {} a blicket?", ctx.labels.label(ctx.object));
        let prompt = template
            .instantiate(&HashMap::from([
                ("HISTORY", history_text(ctx.transcript)),
                (
                    "ELIMINATED_HYPOTHESES",
                    render_hypothesis_list(&self.state.eliminated),
                ),
                (
                    "ACTIVE_HYPOTHESES",
                    render_hypothesis_list(&self.state.active),
                ),
                ("QUESTION", question),
            ]))
            .expect("bindings complete");
        request_answer(
            &self.backend,
            &[
                ChatMessage::system(self.system.clone()),
                ChatMessage::user(prompt),
            ],
        )
    }

    fn sampling_rounds(&self) -> Option<&[SamplingRound]> {
        Some(&self.rounds)
    }
}
