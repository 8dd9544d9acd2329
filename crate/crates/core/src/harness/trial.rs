use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::agents::{Agent, QaContext, RawOutput, SamplingRound, StepContext};
use crate::backend::ChatBackend;
use crate::env::{
    init_env, render_initial_observation, Action, BlicketMask, EnvConfig, EnvState, Event,
    OpeningVariant, RenderOptions, Transcript,
};
use crate::hypothesis::{Belief, Hypothesis, HypothesisSpace, ObservationPair};

use super::config::{build_agent, TrialConfig};
use super::TrialError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Complete,
    /// Stopped early by a backend failure; see `TrialRecord::error`.
    Incomplete,
}

/// Wall-clock durations, only recorded on request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub exploration_secs: f64,
    pub qa_secs: f64,
}

/// Self-contained log of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: TrialConfig,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub ground_truth: Hypothesis,
    /// What the agent saw before its first action.
    pub initial_observation: ObservationPair,
    pub events: Vec<Event>,
    /// One pair per event.
    pub observation_pairs: Vec<ObservationPair>,
    pub transcript: String,
    /// `None` where the answer never parsed.
    pub qa_answers: Vec<Option<bool>>,
    pub qa_correct: Vec<bool>,
    pub all_correct: bool,
    /// Consistent hypotheses after the initial observation, then after
    /// each event.
    pub per_step_support_size: Vec<usize>,
    pub agent_raw_outputs: Vec<RawOutput>,
    pub parse_failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_rounds: Option<Vec<SamplingRound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl TrialRecord {
    /// Initial observation followed by every event's observation.
    pub fn all_observations(&self) -> Vec<ObservationPair> {
        std::iter::once(self.initial_observation)
            .chain(self.observation_pairs.iter().copied())
            .collect()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.events.iter().map(|e| e.action).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaScore {
    pub all_correct: bool,
    pub per_object: Vec<bool>,
}

/// Compares answers with the ground-truth mask.
///
/// Panics if the lengths differ.
pub fn score_qa(answers: &[bool], ground_mask: &BlicketMask) -> QaScore {
    assert_eq!(
        answers.len(),
        ground_mask.len(),
        "answer count must equal object count"
    );
    let per_object: Vec<bool> = answers
        .iter()
        .enumerate()
        .map(|(i, &a)| a == ground_mask.get(i))
        .collect();
    QaScore {
        all_correct: per_object.iter().all(|&c| c),
        per_object,
    }
}

/// Like [`score_qa`], with unparsed answers counted wrong.
pub fn score_answers(answers: &[Option<bool>], ground_mask: &BlicketMask) -> QaScore {
    assert_eq!(
        answers.len(),
        ground_mask.len(),
        "answer count must equal object count"
    );
    let per_object: Vec<bool> = answers
        .iter()
        .enumerate()
        .map(|(i, a)| *a == Some(ground_mask.get(i)))
        .collect();
    QaScore {
        all_correct: per_object.iter().all(|&c| c),
        per_object,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub record_timing: bool,
    /// Stop after exploration (no questions asked).
    pub skip_qa: bool,
}

/// Initial environment for `config`, honouring fixed overrides.
pub fn initial_state(config: &TrialConfig) -> Result<EnvState, TrialError> {
    config.validate()?;
    let drawn = init_env(EnvConfig {
        num_objects: config.num_objects,
        num_blickets: config.num_blickets,
        rule: config.rule,
        horizon: config.horizon,
        seed: config.seed,
    })?;
    let state = EnvState::new(
        config.fixed_blickets.unwrap_or(drawn.blicket_mask),
        config.rule,
        config.fixed_placement.unwrap_or(drawn.placement),
        config.horizon,
    );
    Ok(state.with_render(RenderOptions {
        labels: config.labels,
        style: config.render_style,
    }))
}

fn support_size(belief: &Belief) -> usize {
    belief.support_size()
}

/// Runs exploration and Q&A with an explicit agent.
pub fn run_trial_with_agent(
    config: &TrialConfig,
    agent: &mut dyn Agent,
    options: RunOptions,
) -> Result<TrialRecord, TrialError> {
    let started = Instant::now();
    let mut state = initial_state(config)?;
    let ground_truth = Hypothesis::new(state.blicket_mask, state.rule);
    let initial_observation = ObservationPair::new(state.placement, state.light_on);
    let space = HypothesisSpace::new(config.num_objects)?;
    let mut belief = Belief::uniform(space).filter(&initial_observation)?;

    let mut transcript = Transcript::new(
        &render_initial_observation(&state, OpeningVariant::Default),
        "\n\n",
    );
    let mut observations = vec![initial_observation];
    let mut record = TrialRecord {
        config: config.clone(),
        status: TrialStatus::Complete,
        error: None,
        ground_truth,
        initial_observation,
        events: Vec::new(),
        observation_pairs: Vec::new(),
        transcript: String::new(),
        qa_answers: Vec::new(),
        qa_correct: Vec::new(),
        all_correct: false,
        per_step_support_size: vec![support_size(&belief)],
        agent_raw_outputs: Vec::new(),
        parse_failures: 0,
        sampling_rounds: None,
        timing: None,
    };

    let fail = |mut record: TrialRecord, transcript: &Transcript, agent: &dyn Agent, e| {
        record.status = TrialStatus::Incomplete;
        record.error = Some(format!("{e}"));
        record.transcript = transcript.as_str().to_string();
        record.sampling_rounds = agent.sampling_rounds().map(<[_]>::to_vec);
        warn!(seed = record.config.seed, error = %e, "trial stopped early");
        TrialError::Agent {
            source: e,
            partial: Box::new(record),
        }
    };

    while !state.is_closed() {
        let ctx = StepContext {
            transcript: transcript.as_str(),
            placement: state.placement,
            observations: &observations,
            step: state.step,
            horizon: state.horizon,
            labels: config.labels,
        };
        let decision = match agent.decide(&ctx) {
            Ok(d) => d,
            Err(e) => return Err(fail(record, &transcript, agent, e)),
        };
        record.agent_raw_outputs.extend(decision.raw_outputs);
        record.parse_failures += decision.parse_failures;
        let (next, event) = state.apply_action(decision.action)?;
        debug!(step = next.step, command = %event.command, light = event.light_on);
        transcript.push(&event);
        let obs = ObservationPair::new(event.placement, event.light_on);
        belief = belief.filter(&obs)?;
        observations.push(obs);
        record.observation_pairs.push(obs);
        record.per_step_support_size.push(support_size(&belief));
        record.events.push(event);
        state = next;
    }
    let explored = started.elapsed();
    record.transcript = transcript.as_str().to_string();

    if !options.skip_qa {
        for object in 0..config.num_objects {
            let ctx = QaContext {
                transcript: transcript.as_str(),
                observations: &observations,
                num_objects: config.num_objects,
                object,
                labels: config.labels,
            };
            match agent.answer(&ctx) {
                Ok(answer) => {
                    record.agent_raw_outputs.extend(answer.raw_outputs);
                    record.qa_answers.push(answer.value);
                }
                Err(e) => return Err(fail(record, &transcript, agent, e)),
            }
        }
        let score = score_answers(&record.qa_answers, &ground_truth.mask);
        record.qa_correct = score.per_object;
        record.all_correct = score.all_correct;
    }
    record.sampling_rounds = agent.sampling_rounds().map(<[_]>::to_vec);
    if options.record_timing {
        let total = started.elapsed();
        record.timing = Some(Timing {
            exploration_secs: explored.as_secs_f64(),
            qa_secs: (total - explored).as_secs_f64(),
        });
    }
    Ok(record)
}

/// Runs one trial; chat and sampling agents use `backend`.
pub fn run_trial(
    config: &TrialConfig,
    backend: Option<Arc<dyn ChatBackend>>,
) -> Result<TrialRecord, TrialError> {
    run_trial_opts(config, backend, RunOptions::default())
}

pub fn run_trial_opts(
    config: &TrialConfig,
    backend: Option<Arc<dyn ChatBackend>>,
    options: RunOptions,
) -> Result<TrialRecord, TrialError> {
    let mut agent = build_agent(config, backend)?;
    run_trial_with_agent(config, agent.as_mut(), options)
}

/// Backend handle for the trial with the given seed.
pub type BackendFactory<'a> = dyn Fn(u64) -> Option<Arc<dyn ChatBackend>> + Sync + 'a;

/// Runs one trial per seed in parallel; results come back in seed order.
pub fn run_trials(
    base: &TrialConfig,
    seeds: &[u64],
    backends: &BackendFactory<'_>,
    options: RunOptions,
) -> Vec<Result<TrialRecord, TrialError>> {
    seeds
        .par_iter()
        .map(|&seed| run_trial_opts(&base.with_seed(seed), backends(seed), options))
        .collect()
}
