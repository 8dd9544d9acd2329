use crate::env::{Action, Placement};
use crate::hypothesis::{
    candidate_next_states, Belief, HypothesisError, HypothesisSpace, ObservationPair,
};

use super::{Agent, AgentDecision, AgentError, Answer, QaContext, StepContext};

/// Move that turns `from` into `to`, which must differ in exactly one place.
fn move_between(from: &Placement, to: &Placement) -> Action {
    let i = (0..from.len())
        .find(|&i| from.get(i) != to.get(i))
        .expect("placements differ");
    if to.get(i) {
        Action::Put(i)
    } else {
        Action::Take(i)
    }
}

/// Nearest placement (Hamming distance, then canonical order) on which the
/// support disagrees, if any.
fn nearest_informative(belief: &Belief, placement: &Placement) -> Option<Placement> {
    let n = placement.len();
    if n > 20 {
        return None;
    }
    (0..1u32 << n)
        .map(|bits| Placement::from_bits(n, bits))
        .filter(|p| {
            let [off, on] = belief.split(p);
            off > 0 && on > 0
        })
        .min_by_key(|p| (p.hamming(placement), p.to_string()))
}

/// One step of expected-information-gain maximisation.
///
/// Scores every single-object move and takes the best, lowest object index
/// on ties. Exits once the support is resolved. If no single move is
/// informative but the support is not resolved yet, walks toward the nearest
/// placement that is.
pub fn oracle_step(
    belief: &Belief,
    placement: &Placement,
) -> Result<AgentDecision, HypothesisError> {
    if belief.is_resolved() {
        return Ok(AgentDecision::new(Action::Exit));
    }
    let mut best: Option<(f64, Placement)> = None;
    for candidate in candidate_next_states(placement) {
        let gain = belief.expected_info_gain(&candidate)?;
        if best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((gain, candidate));
        }
    }
    let target = match best {
        Some((gain, candidate)) if gain > 0.0 => candidate,
        _ => match nearest_informative(belief, placement) {
            Some(goal) => {
                let i = (0..placement.len())
                    .find(|&i| placement.get(i) != goal.get(i))
                    .unwrap();
                placement.toggled(i)
            }
            None => return Ok(AgentDecision::new(Action::Exit)),
        },
    };
    Ok(AgentDecision::new(move_between(placement, &target)))
}

/// True iff `object` is a blicket under every hypothesis in the support.
pub fn oracle_answer(belief: &Belief, object: usize) -> bool {
    belief.support_size() > 0 && belief.support().all(|h| h.mask.get(object))
}

/// Exact Bayesian agent over the full hypothesis space.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    space: HypothesisSpace,
    belief: Belief,
    seen: usize,
}

impl OracleAgent {
    pub fn new(num_objects: usize) -> Result<Self, HypothesisError> {
        let space = HypothesisSpace::new(num_objects)?;
        Ok(Self {
            space,
            belief: Belief::uniform(space),
            seen: 0,
        })
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    fn sync(&mut self, observations: &[ObservationPair]) -> Result<(), HypothesisError> {
        if observations.len() < self.seen {
            self.belief = Belief::uniform(self.space);
            self.seen = 0;
        }
        self.belief = self.belief.filter_all(&observations[self.seen..])?;
        self.seen = observations.len();
        Ok(())
    }
}

impl Agent for OracleAgent {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        self.sync(ctx.observations)?;
        Ok(oracle_step(&self.belief, &ctx.placement)?)
    }

    fn answer(&mut self, ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        self.sync(ctx.observations)?;
        Ok(Answer::known(oracle_answer(&self.belief, ctx.object)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BlicketMask, Rule};
    use crate::hypothesis::Hypothesis;

    fn p(s: &str) -> Placement {
        s.parse().unwrap()
    }

    #[test]
    fn single_object_puts_it_on() {
        let belief = Belief::uniform(HypothesisSpace::new(1).unwrap());
        assert_eq!(
            oracle_step(&belief, &p("0")).unwrap().action,
            Action::Put(0)
        );
    }

    #[test]
    fn resolved_belief_exits() {
        let space = HypothesisSpace::new(3).unwrap();
        let truth = Hypothesis::new(BlicketMask::from_indices(3, &[1, 2]), Rule::Conjunctive);
        let belief = Belief::from_hypotheses(space, [truth]);
        assert_eq!(
            oracle_step(&belief, &p("000")).unwrap().action,
            Action::Exit
        );
        // Functional duplicates count as resolved.
        let single = BlicketMask::from_indices(3, &[0]);
        let belief = Belief::from_hypotheses(
            space,
            [
                Hypothesis::new(single, Rule::Disjunctive),
                Hypothesis::new(single, Rule::Conjunctive),
            ],
        );
        assert_eq!(
            oracle_step(&belief, &p("010")).unwrap().action,
            Action::Exit
        );
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // Under the full prior every object is symmetric.
        let belief = Belief::uniform(HypothesisSpace::new(4).unwrap());
        assert_eq!(
            oracle_step(&belief, &p("0000")).unwrap().action,
            Action::Put(0)
        );
        assert_eq!(
            oracle_step(&belief, &p("1111")).unwrap().action,
            Action::Take(0)
        );
    }

    #[test]
    fn walks_toward_informative_placement() {
        // {1} DISJ vs {1,2} DISJ only disagree when 2 is on and 1 off.
        let space = HypothesisSpace::new(3).unwrap();
        let belief = Belief::from_hypotheses(
            space,
            [
                Hypothesis::new(BlicketMask::from_indices(3, &[1]), Rule::Disjunctive),
                Hypothesis::new(BlicketMask::from_indices(3, &[1, 2]), Rule::Disjunctive),
            ],
        );
        // From 110 no single move separates them (2 on keeps 1 on too).
        let first = oracle_step(&belief, &p("110")).unwrap().action;
        assert_eq!(first, Action::Take(1));
        let next = p("100");
        assert_eq!(oracle_step(&belief, &next).unwrap().action, Action::Put(2));
    }

    #[test]
    fn answers_from_support() {
        let space = HypothesisSpace::new(3).unwrap();
        let belief = Belief::uniform(space)
            .filter(&ObservationPair::new(p("011"), true))
            .unwrap();
        // Not resolved: nobody is a blicket under every survivor.
        assert!(!(0..3).any(|i| oracle_answer(&belief, i)));
        let truth = Hypothesis::new(BlicketMask::from_indices(3, &[1, 2]), Rule::Conjunctive);
        let resolved = Belief::from_hypotheses(space, [truth]);
        assert_eq!(
            (0..3)
                .map(|i| oracle_answer(&resolved, i))
                .collect::<Vec<_>>(),
            vec![false, true, true]
        );
    }
}
