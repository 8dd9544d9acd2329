//! Exact inference over the space of (blicket mask, rule) hypotheses.
//!
//! For `N` objects there are `2^(N+1)` hypotheses. A [`Belief`] is the set of
//! hypotheses still consistent with everything observed, weighted uniformly,
//! and is stored as one membership bit per hypothesis. Entropies are in bits.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{machine_output, BlicketMask, Placement, Rule, MAX_OBJECTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HypothesisError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// No hypothesis in the space explains the observations.
    #[error("observations are inconsistent with every hypothesis in the space")]
    InconsistentHistory,
}

/// A candidate explanation of the machine: which objects are blickets and
/// which rule combines them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hypothesis {
    pub mask: BlicketMask,
    pub rule: Rule,
}

/// Identifies the boolean function a hypothesis computes.
///
/// Distinct hypotheses can compute the same function: a one-blicket mask
/// behaves identically under both rules, the empty disjunction is constant
/// off and the empty conjunction constant on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKey {
    Constant(bool),
    Single(usize),
    Combined(u32, Rule),
}

impl Hypothesis {
    pub fn new(mask: BlicketMask, rule: Rule) -> Self {
        Self { mask, rule }
    }

    pub fn num_objects(&self) -> usize {
        self.mask.len()
    }

    /// The light this hypothesis predicts for `placement`.
    pub fn predict(&self, placement: &Placement) -> bool {
        machine_output(self.rule, &self.mask, placement)
    }

    pub fn function_key(&self) -> FunctionKey {
        match self.mask.count_ones() {
            0 => FunctionKey::Constant(self.rule == Rule::Conjunctive),
            1 => FunctionKey::Single(self.mask.bits().trailing_zeros() as usize),
            _ => FunctionKey::Combined(self.mask.bits(), self.rule),
        }
    }

    /// True when both hypotheses compute the same truth table.
    pub fn same_function(&self, other: &Hypothesis) -> bool {
        self.num_objects() == other.num_objects() && self.function_key() == other.function_key()
    }
}

pub fn predict(h: &Hypothesis, placement: &Placement) -> bool {
    h.predict(placement)
}

/// All hypotheses for a fixed object count, in canonical order: masks in
/// lexicographic order of their 0/1 vectors (object 0 most significant),
/// disjunctive before conjunctive for each mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HypothesisSpace {
    num_objects: usize,
}

fn reverse_low_bits(value: u32, width: usize) -> u32 {
    if width == 0 {
        0
    } else {
        value.reverse_bits() >> (32 - width)
    }
}

impl HypothesisSpace {
    pub fn new(num_objects: usize) -> Result<Self, HypothesisError> {
        if num_objects == 0 || num_objects > MAX_OBJECTS {
            return Err(HypothesisError::InvalidConfig(format!(
                "num_objects must be in 1..={MAX_OBJECTS}, got {num_objects}"
            )));
        }
        Ok(Self { num_objects })
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    /// `2^(N+1)`.
    pub fn len(&self) -> usize {
        1 << (self.num_objects + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, index: usize) -> Hypothesis {
        assert!(index < self.len(), "hypothesis index {index} out of range");
        let rule = if index & 1 == 0 {
            Rule::Disjunctive
        } else {
            Rule::Conjunctive
        };
        let bits = reverse_low_bits((index >> 1) as u32, self.num_objects);
        Hypothesis::new(BlicketMask::from_bits(self.num_objects, bits), rule)
    }

    pub fn index_of(&self, h: &Hypothesis) -> usize {
        assert_eq!(
            h.num_objects(),
            self.num_objects,
            "hypothesis arity mismatch"
        );
        let lex = reverse_low_bits(h.mask.bits(), self.num_objects) as usize;
        (lex << 1) | usize::from(h.rule == Rule::Conjunctive)
    }

    pub fn iter(&self) -> impl Iterator<Item = Hypothesis> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}

pub fn enumerate_space(num_objects: usize) -> Result<HypothesisSpace, HypothesisError> {
    HypothesisSpace::new(num_objects)
}

/// One observed (placement, light) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationPair {
    pub placement: Placement,
    pub light_on: bool,
}

impl ObservationPair {
    pub fn new(placement: Placement, light_on: bool) -> Self {
        Self {
            placement,
            light_on,
        }
    }
}

/// Uniform belief over the hypotheses still consistent with the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Belief {
    space: HypothesisSpace,
    words: Vec<u64>,
    count: usize,
}

impl Belief {
    /// Every hypothesis in the space.
    pub fn uniform(space: HypothesisSpace) -> Self {
        let len = space.len();
        let mut words = vec![u64::MAX; len.div_ceil(64)];
        if !len.is_multiple_of(64) {
            *words.last_mut().unwrap() = (1u64 << (len % 64)) - 1;
        }
        Self {
            space,
            words,
            count: len,
        }
    }

    pub fn empty(space: HypothesisSpace) -> Self {
        Self {
            space,
            words: vec![0; space.len().div_ceil(64)],
            count: 0,
        }
    }

    pub fn from_hypotheses<I: IntoIterator<Item = Hypothesis>>(
        space: HypothesisSpace,
        hypotheses: I,
    ) -> Self {
        let mut belief = Self::empty(space);
        for h in hypotheses {
            belief.insert(&h);
        }
        belief
    }

    fn insert(&mut self, h: &Hypothesis) {
        let i = self.space.index_of(h);
        let bit = 1u64 << (i % 64);
        if self.words[i / 64] & bit == 0 {
            self.words[i / 64] |= bit;
            self.count += 1;
        }
    }

    pub fn space(&self) -> HypothesisSpace {
        self.space
    }

    pub fn support_size(&self) -> usize {
        self.count
    }

    pub fn contains(&self, h: &Hypothesis) -> bool {
        let i = self.space.index_of(h);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn support_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + tz)
            })
        })
    }

    /// Support members in canonical order.
    pub fn support(&self) -> impl Iterator<Item = Hypothesis> + '_ {
        self.support_indices().map(|i| self.space.get(i))
    }

    /// Keeps the hypotheses that predict `obs`. Errors if none remain.
    pub fn filter(&self, obs: &ObservationPair) -> Result<Belief, HypothesisError> {
        let mut next = Belief::empty(self.space);
        for i in self.support_indices() {
            if self.space.get(i).predict(&obs.placement) == obs.light_on {
                next.words[i / 64] |= 1 << (i % 64);
                next.count += 1;
            }
        }
        if next.count == 0 {
            return Err(HypothesisError::InconsistentHistory);
        }
        Ok(next)
    }

    /// Filters through a sequence of observations.
    pub fn filter_all<'a, I>(&self, observations: I) -> Result<Belief, HypothesisError>
    where
        I: IntoIterator<Item = &'a ObservationPair>,
    {
        let mut belief = self.clone();
        for obs in observations {
            belief = belief.filter(obs)?;
        }
        Ok(belief)
    }

    /// `log2 |support|`.
    pub fn entropy(&self) -> Result<f64, HypothesisError> {
        if self.count == 0 {
            return Err(HypothesisError::InconsistentHistory);
        }
        Ok((self.count as f64).log2())
    }

    /// Entropy drop caused by observing `obs`.
    pub fn info_gain(&self, obs: &ObservationPair) -> Result<f64, HypothesisError> {
        Ok(self.entropy()? - self.filter(obs)?.entropy()?)
    }

    /// Support sizes predicting the light off and on for `candidate`.
    pub fn split(&self, candidate: &Placement) -> [usize; 2] {
        let mut on = 0;
        for i in self.support_indices() {
            if self.space.get(i).predict(candidate) {
                on += 1;
            }
        }
        [self.count - on, on]
    }

    /// Outcome-averaged information gain of visiting `candidate`.
    ///
    /// With `K_y` support members predicting outcome `y`, this is
    /// `log2 K - sum_y (K_y / K) log2 K_y`.
    pub fn expected_info_gain(&self, candidate: &Placement) -> Result<f64, HypothesisError> {
        if self.count == 0 {
            return Err(HypothesisError::InconsistentHistory);
        }
        let total = self.count as f64;
        let conditional: f64 = self
            .split(candidate)
            .iter()
            .filter(|&&k| k > 0)
            .map(|&k| (k as f64 / total) * (k as f64).log2())
            .sum();
        Ok(total.log2() - conditional)
    }

    /// True when the support is nonempty and all members compute the same
    /// function, so no observation can shrink it further.
    pub fn is_resolved(&self) -> bool {
        let mut members = self.support();
        match members.next() {
            None => false,
            Some(first) => members.all(|h| h.same_function(&first)),
        }
    }

    /// Number of distinct functions in the support.
    pub fn distinct_functions(&self) -> usize {
        self.support()
            .map(|h| h.function_key())
            .collect::<HashSet<_>>()
            .len()
    }
}

pub fn filter_consistent(
    belief: &Belief,
    obs: &ObservationPair,
) -> Result<Belief, HypothesisError> {
    belief.filter(obs)
}

pub fn entropy(belief: &Belief) -> Result<f64, HypothesisError> {
    belief.entropy()
}

pub fn info_gain(belief: &Belief, obs: &ObservationPair) -> Result<f64, HypothesisError> {
    belief.info_gain(obs)
}

pub fn expected_info_gain(belief: &Belief, candidate: &Placement) -> Result<f64, HypothesisError> {
    belief.expected_info_gain(candidate)
}

/// Placements reachable with one action, in object order.
pub fn candidate_next_states(placement: &Placement) -> Vec<Placement> {
    (0..placement.len()).map(|i| placement.toggled(i)).collect()
}
