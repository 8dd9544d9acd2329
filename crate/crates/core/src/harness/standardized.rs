//! Exploration-only trajectories shared across agents for later
//! inference-only Q&A.

use serde::{Deserialize, Serialize};

use crate::env::{Action, Event};
use crate::hypothesis::{Hypothesis, ObservationPair};

use super::{run_trial_opts, AgentKind, RunOptions, TrialConfig, TrialError, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Oracle,
    Random,
    CountBased,
    /// Recorded sessions (typically from a language model) played back.
    Replay,
}

impl TrajectorySource {
    pub fn agent_kind(&self) -> AgentKind {
        match self {
            TrajectorySource::Oracle => AgentKind::Oracle,
            TrajectorySource::Random => AgentKind::Random,
            TrajectorySource::CountBased => AgentKind::CountBased,
            TrajectorySource::Replay => AgentKind::Replay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub source: TrajectorySource,
    pub seed: u64,
    pub ground_truth: Hypothesis,
    pub initial_observation: ObservationPair,
    pub events: Vec<Event>,
    pub transcript: String,
}

impl Trajectory {
    fn from_record(source: TrajectorySource, record: TrialRecord) -> Self {
        Self {
            source,
            seed: record.config.seed,
            ground_truth: record.ground_truth,
            initial_observation: record.initial_observation,
            events: record.events,
            transcript: record.transcript,
        }
    }

    /// Number of actions taken, EXIT included.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.events.iter().map(|e| e.action).collect()
    }
}

/// Runs exploration only, one trajectory per seed in seed order.
///
/// For [`TrajectorySource::Replay`] the actions come from
/// `config.replay_actions`.
pub fn generate_standardized_data(
    source: TrajectorySource,
    config: &TrialConfig,
    seeds: &[u64],
) -> Result<Vec<Trajectory>, TrialError> {
    let base = TrialConfig {
        agent_kind: source.agent_kind(),
        ..config.clone()
    };
    let options = RunOptions {
        skip_qa: true,
        ..RunOptions::default()
    };
    let mut out = Vec::with_capacity(seeds.len());
    for result in super::run_trials(&base, seeds, &|_| None, options) {
        out.push(Trajectory::from_record(source, result?));
    }
    let lengths: Vec<usize> = out.iter().map(Trajectory::len).collect();
    let (mean, sd) = length_stats(&lengths);
    tracing::info!(?source, trials = out.len(), mean, sd, "trajectory lengths");
    Ok(out)
}

/// Replays recorded trials' action sequences in a fresh environment.
pub fn replay_records(records: &[TrialRecord]) -> Result<Vec<Trajectory>, TrialError> {
    records
        .iter()
        .map(|record| {
            let config = TrialConfig {
                agent_kind: AgentKind::Replay,
                replay_actions: record.actions(),
                fixed_blickets: Some(record.ground_truth.mask),
                fixed_placement: Some(record.initial_observation.placement),
                ..record.config.clone()
            };
            let options = RunOptions {
                skip_qa: true,
                ..RunOptions::default()
            };
            run_trial_opts(&config, None, options)
                .map(|r| Trajectory::from_record(TrajectorySource::Replay, r))
        })
        .collect()
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn length_stats(lengths: &[usize]) -> (f64, f64) {
    if lengths.is_empty() {
        return (0.0, 0.0);
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / n;
    if lengths.len() < 2 {
        return (mean, 0.0);
    }
    let var = lengths
        .iter()
        .map(|&l| (l as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, var.sqrt())
}
