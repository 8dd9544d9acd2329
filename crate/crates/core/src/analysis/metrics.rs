use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::agents::OutputKind;
use crate::harness::{TrialRecord, TrialStatus};
use crate::hypothesis::{Belief, HypothesisSpace};

use super::{elimination_progress, AnalysisError};

/// Per-trial exploration and accuracy measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub all_correct: bool,
    /// Fraction of objects answered correctly.
    pub per_object_accuracy: f64,
    pub steps_taken: usize,
    pub unique_states_visited: usize,
    /// log2 of the prior size minus log2 of the final support size.
    pub info_gain_bits: f64,
    pub final_support_size: usize,
    /// Distinct boolean functions in the final support.
    pub final_distinct_functions: usize,
    /// Mean completion tokens of exploration replies (characters when the
    /// backend reported no token counts).
    pub response_length: Option<f64>,
    /// Progress after the initial observation, then after each event.
    pub progress_curve: Vec<f64>,
    pub final_progress: f64,
}

/// Recomputes supports from the logged observations and derives metrics.
///
/// Fails if the recomputed supports disagree with the logged ones.
pub fn trial_metrics(
    record: &TrialRecord,
    space: HypothesisSpace,
) -> Result<TrialMetrics, AnalysisError> {
    if record.status != TrialStatus::Complete {
        return Err(AnalysisError::CorruptRecord("trial is incomplete".into()));
    }
    if space.num_objects() != record.config.num_objects {
        return Err(AnalysisError::InvalidInput(format!(
            "space has {} objects, record has {}",
            space.num_objects(),
            record.config.num_objects
        )));
    }
    if record.observation_pairs.len() != record.events.len() {
        return Err(AnalysisError::CorruptRecord(
            "observation count differs from event count".into(),
        ));
    }
    for (event, obs) in record.events.iter().zip(&record.observation_pairs) {
        if event.placement != obs.placement || event.light_on != obs.light_on {
            return Err(AnalysisError::CorruptRecord(format!(
                "observation pair differs from event at {:?}",
                event.command
            )));
        }
    }

    let mut belief = Belief::uniform(space);
    let mut supports = Vec::with_capacity(record.events.len() + 1);
    for obs in record.all_observations() {
        belief = belief
            .filter(&obs)
            .map_err(|_| AnalysisError::InconsistentHistory)?;
        supports.push(belief.support_size());
    }
    if supports != record.per_step_support_size {
        return Err(AnalysisError::CorruptRecord(format!(
            "logged support sizes {:?} differ from recomputed {:?}",
            record.per_step_support_size, supports
        )));
    }
    if !belief.contains(&record.ground_truth) {
        return Err(AnalysisError::CorruptRecord(
            "ground truth is inconsistent with the logged observations".into(),
        ));
    }

    let total = space.len();
    let progress_curve = supports
        .iter()
        .map(|&remaining| elimination_progress(total, remaining))
        .collect::<Result<Vec<_>, _>>()?;
    let final_support_size = belief.support_size();
    let unique_states_visited = record
        .all_observations()
        .iter()
        .map(|o| o.placement)
        .collect::<HashSet<_>>()
        .len();
    let correct = record.qa_correct.iter().filter(|&&c| c).count();
    let per_object_accuracy = if record.qa_correct.is_empty() {
        0.0
    } else {
        correct as f64 / record.qa_correct.len() as f64
    };

    Ok(TrialMetrics {
        all_correct: record.all_correct,
        per_object_accuracy,
        steps_taken: record.events.len(),
        unique_states_visited,
        info_gain_bits: (total as f64).log2() - (final_support_size as f64).log2(),
        final_support_size,
        final_distinct_functions: belief.distinct_functions(),
        response_length: response_length(record),
        final_progress: *progress_curve
            .last()
            .expect("initial observation always present"),
        progress_curve,
    })
}

fn response_length(record: &TrialRecord) -> Option<f64> {
    let replies: Vec<_> = record
        .agent_raw_outputs
        .iter()
        .filter(|o| o.kind == OutputKind::Action)
        .collect();
    if replies.is_empty() {
        return None;
    }
    let lengths: Vec<f64> = if replies.iter().all(|o| o.completion_tokens.is_some()) {
        replies
            .iter()
            .map(|o| o.completion_tokens.unwrap() as f64)
            .collect()
    } else {
        replies
            .iter()
            .map(|o| o.text.chars().count() as f64)
            .collect()
    };
    Some(lengths.iter().sum::<f64>() / lengths.len() as f64)
}
