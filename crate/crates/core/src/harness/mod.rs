//! Trial orchestration: configuration, the exploration then Q&A lifecycle,
//! fixed scenario scripts and record persistence.

mod config;
mod records;
mod scenarios;
mod standardized;
mod trial;

pub use config::{build_agent, AgentKind, SamplingParams, TrialConfig};
pub use records::{parse_records, read_records, record_to_line, write_records, RecordWriter};
pub use scenarios::{
    build_scenario, run_scenario_battery, BatteryError, BatteryResult, Scenario, ScenarioKind,
};
pub use standardized::{
    generate_standardized_data, length_stats, replay_records, Trajectory, TrajectorySource,
};
pub use trial::{
    initial_state, run_trial, run_trial_opts, run_trial_with_agent, run_trials, score_answers,
    score_qa, BackendFactory, QaScore, RunOptions, Timing, TrialRecord, TrialStatus,
};

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::hypothesis::HypothesisError;

#[derive(Debug, thiserror::Error)]
pub enum TrialError {
    #[error("invalid trial config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    /// The agent failed mid-trial; `partial` holds everything up to then.
    #[error("agent failed at step {}: {source}", partial.events.len())]
    Agent {
        source: AgentError,
        partial: Box<TrialRecord>,
    },
    #[error("record i/o: {0}")]
    Io(String),
}

impl TrialError {
    /// The incomplete record, if the failure happened mid-trial.
    pub fn partial_record(&self) -> Option<&TrialRecord> {
        match self {
            TrialError::Agent { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
