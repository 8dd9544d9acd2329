use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Placement};
use crate::hypothesis::{Belief, HypothesisSpace};

use super::{oracle_answer, Agent, AgentDecision, AgentError, Answer, QaContext, StepContext};

/// Uniform over the 2N single-object moves (object, then PUT or TAKE).
///
/// Moves may be redundant; the agent never exits.
pub fn random_step<R: Rng + ?Sized>(rng: &mut R, placement: &Placement) -> AgentDecision {
    let object = rng.random_range(0..placement.len());
    let action = if rng.random_bool(0.5) {
        Action::Put(object)
    } else {
        Action::Take(object)
    };
    AgentDecision::new(action)
}

/// Random actions, coin-flip answers.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl Agent for RandomAgent {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        Ok(random_step(&mut self.rng, &ctx.placement))
    }

    fn answer(&mut self, _ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        Ok(Answer::known(self.rng.random_bool(0.5)))
    }
}

/// How often each object has been moved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationCounts {
    counts: Vec<u64>,
}

impl PerturbationCounts {
    pub fn new(num_objects: usize) -> Self {
        Self {
            counts: vec![0; num_objects],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Selection weights `1 / (1 + count)`.
    pub fn weights(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| 1.0 / (1.0 + c as f64))
            .collect()
    }

    pub fn increment(&mut self, object: usize) {
        self.counts[object] += 1;
    }
}

/// Object selection rule of the count-based agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Sample with probability proportional to `1 / (1 + count)`.
    #[default]
    Weighted,
    /// Always the least-moved object, lowest index on ties.
    MinCount,
}

/// Picks an object by its perturbation count and toggles it.
pub fn count_based_step<R: Rng + ?Sized>(
    counts: &mut PerturbationCounts,
    placement: &Placement,
    mode: CountMode,
    rng: &mut R,
) -> AgentDecision {
    let object = match mode {
        CountMode::Weighted => WeightedIndex::new(counts.weights())
            .expect("weights are positive")
            .sample(rng),
        CountMode::MinCount => {
            let min = *counts.counts().iter().min().expect("at least one object");
            counts.counts().iter().position(|&c| c == min).unwrap()
        }
    };
    counts.increment(object);
    let action = if placement.get(object) {
        Action::Take(object)
    } else {
        Action::Put(object)
    };
    AgentDecision::new(action)
}

/// Count-based exploration baseline; answers by coin flip.
#[derive(Debug, Clone)]
pub struct CountBasedAgent {
    counts: PerturbationCounts,
    mode: CountMode,
    rng: ChaCha8Rng,
}

impl CountBasedAgent {
    pub fn new(num_objects: usize, mode: CountMode, rng: ChaCha8Rng) -> Self {
        Self {
            counts: PerturbationCounts::new(num_objects),
            mode,
            rng,
        }
    }

    pub fn counts(&self) -> &PerturbationCounts {
        &self.counts
    }
}

impl Agent for CountBasedAgent {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        Ok(count_based_step(
            &mut self.counts,
            &ctx.placement,
            self.mode,
            &mut self.rng,
        ))
    }

    fn answer(&mut self, _ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        Ok(Answer::known(self.rng.random_bool(0.5)))
    }
}

/// Plays a fixed action list, then exits. Answers from the exact posterior
/// of what it observed.
#[derive(Debug, Clone)]
pub struct ReplayAgent {
    actions: Vec<Action>,
    next: usize,
}

impl ReplayAgent {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, next: 0 }
    }
}

impl Agent for ReplayAgent {
    fn decide(&mut self, _ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        let action = self.actions.get(self.next).copied().unwrap_or(Action::Exit);
        self.next += 1;
        Ok(AgentDecision::new(action))
    }

    fn answer(&mut self, ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        let belief =
            Belief::uniform(HypothesisSpace::new(ctx.num_objects)?).filter_all(ctx.observations)?;
        Ok(Answer::known(oracle_answer(&belief, ctx.object)))
    }
}
