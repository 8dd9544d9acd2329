//! The blicket detector environment.
//!
//! A room holds `N` objects and one machine. A hidden subset of the objects
//! (the blickets) switches the machine's light on according to one of two
//! rules. The agent moves one object per step and reads back a line of text.
//! Everything here is deterministic given the seed, and every transition
//! returns a fresh [`EnvState`].

use std::fmt;
use std::sync::LazyLock;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest object count the bit-packed representations support.
pub const MAX_OBJECTS: usize = 24;

/// Probability that an object starts the episode on the machine.
pub const INITIAL_ON_MACHINE_PROB: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the episode is closed (step {step} of {horizon}, terminated: {terminated})")]
    EpisodeClosed {
        step: usize,
        horizon: usize,
        terminated: bool,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommandError {
    #[error("could not parse a command from {0:?}")]
    Unparseable(String),
    /// The command was well formed but names an object outside the room.
    /// `action` carries the out-of-range index so it can still be echoed.
    #[error("{action:?} names an object outside the room ({num_objects} objects)")]
    InvalidObject { action: Action, num_objects: usize },
}

/// How blickets combine to switch the machine on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// On when any blicket is on the machine.
    Disjunctive,
    /// On only when every blicket is on the machine.
    Conjunctive,
}

impl Rule {
    pub const ALL: [Rule; 2] = [Rule::Disjunctive, Rule::Conjunctive];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Disjunctive => "disjunctive",
            Rule::Conjunctive => "conjunctive",
        })
    }
}

impl std::str::FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "disjunctive" | "disj" | "or" | "any" => Ok(Rule::Disjunctive),
            "conjunctive" | "conj" | "and" | "all" => Ok(Rule::Conjunctive),
            other => Err(format!("unknown rule {other:?}")),
        }
    }
}

/// One boolean per object, packed into a `u32` (bit `i` is object `i`).
///
/// Used both for placements (`true` = on the machine) and for blicket masks.
/// Serialized as a string of `0`/`1` characters in object order, e.g. `"011"`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectFlags {
    len: u8,
    bits: u32,
}

pub type Placement = ObjectFlags;
pub type BlicketMask = ObjectFlags;

impl ObjectFlags {
    /// All-false vector of length `len`.
    ///
    /// Panics if `len` exceeds [`MAX_OBJECTS`].
    pub fn empty(len: usize) -> Self {
        assert!(
            len <= MAX_OBJECTS,
            "at most {MAX_OBJECTS} objects are supported"
        );
        Self {
            len: len as u8,
            bits: 0,
        }
    }

    pub fn from_bits(len: usize, bits: u32) -> Self {
        let mut flags = Self::empty(len);
        flags.bits = bits & Self::full_bits(len);
        flags
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut flags = Self::empty(values.len());
        for (i, &v) in values.iter().enumerate() {
            if v {
                flags.bits |= 1 << i;
            }
        }
        flags
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut flags = Self::empty(len);
        for &i in indices {
            assert!(i < len, "index {i} out of range for length {len}");
            flags.bits |= 1 << i;
        }
        flags
    }

    fn full_bits(len: usize) -> u32 {
        if len == 32 {
            u32::MAX
        } else {
            (1u32 << len) - 1
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len(),
            "index {i} out of range for length {}",
            self.len
        );
        self.bits >> i & 1 == 1
    }

    pub fn with(&self, i: usize, value: bool) -> Self {
        assert!(
            i < self.len(),
            "index {i} out of range for length {}",
            self.len
        );
        let mut out = *self;
        if value {
            out.bits |= 1 << i;
        } else {
            out.bits &= !(1 << i);
        }
        out
    }

    pub fn toggled(&self, i: usize) -> Self {
        self.with(i, !self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<bool> {
        self.iter().collect()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }
}

impl fmt::Debug for ObjectFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl fmt::Display for ObjectFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for ObjectFlags {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_OBJECTS {
            return Err(format!("more than {MAX_OBJECTS} objects in {s:?}"));
        }
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("unexpected character {other:?} in {s:?}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_bools(&values))
    }
}

impl Serialize for ObjectFlags {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectFlags {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Light state for `rule` with blickets `mask` under `placement`.
///
/// An empty disjunction is false and an empty conjunction is true.
/// Panics when the lengths differ.
pub fn machine_output(rule: Rule, mask: &BlicketMask, placement: &Placement) -> bool {
    assert_eq!(
        mask.len(),
        placement.len(),
        "mask and placement must cover the same objects"
    );
    match rule {
        Rule::Disjunctive => mask.bits & placement.bits != 0,
        Rule::Conjunctive => mask.bits & placement.bits == mask.bits,
    }
}

/// A single agent command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "object", rename_all = "snake_case")]
pub enum Action {
    /// Put the object on the machine.
    Put(usize),
    /// Take the object off the machine (equivalently, put it on the floor).
    Take(usize),
    Look,
    Exit,
}

impl Action {
    pub fn object(&self) -> Option<usize> {
        match *self {
            Action::Put(i) | Action::Take(i) => Some(i),
            Action::Look | Action::Exit => None,
        }
    }

    /// The command as an agent would type it, without the leading `> `.
    pub fn command_text(&self, labels: ObjectLabels) -> String {
        match *self {
            Action::Put(i) => format!("put object {} on machine", labels.label(i)),
            Action::Take(i) => format!("take object {} off machine", labels.label(i)),
            Action::Look => "look".to_string(),
            Action::Exit => "exit".to_string(),
        }
    }
}

/// How objects are named in rendered text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectLabels {
    #[default]
    Numeric,
    /// `A`, `B`, `C`, ...
    Letters,
}

impl ObjectLabels {
    pub fn label(&self, i: usize) -> String {
        match self {
            ObjectLabels::Numeric => i.to_string(),
            ObjectLabels::Letters => {
                if i < 26 {
                    ((b'A' + i as u8) as char).to_string()
                } else {
                    i.to_string()
                }
            }
        }
    }

    /// Inverse of [`ObjectLabels::label`]; accepts either labelling.
    pub fn index_of(token: &str) -> Option<usize> {
        if let Ok(i) = token.parse::<usize>() {
            return Some(i);
        }
        let mut chars = token.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_alphabetic() => {
                Some((c.to_ascii_uppercase() as u8 - b'A') as usize)
            }
            _ => None,
        }
    }
}

/// Wording of the take-off line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderStyle {
    /// "You took object 0 off the machine."
    #[default]
    OffThe,
    /// "You took object 0 off of the machine."
    OffOfThe,
}

/// Which opening paragraph to print.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeningVariant {
    /// Three paragraphs, as shown to exploring agents.
    #[default]
    Default,
    /// Two-paragraph form used by the inference training scripts.
    Training,
    /// "You are in a new room..." form used by the inference test trial.
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RenderOptions {
    pub labels: ObjectLabels,
    pub style: RenderStyle,
}

/// Whether an event moved the world or was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    InvalidObject,
}

/// One accepted step of the episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub action: Action,
    /// Echo of the command line (without `> `).
    pub command: String,
    /// The observation line shown to the agent.
    pub text: String,
    pub light_on: bool,
    /// Placement after the action.
    pub placement: Placement,
    pub outcome: Outcome,
}

impl Event {
    /// `> command\ntext\n`
    pub fn transcript_lines(&self) -> String {
        format!("> {}\n{}\n", self.command, self.text)
    }
}

fn light_sentence(light_on: bool) -> &'static str {
    if light_on {
        "The light on the machine is now on."
    } else {
        "The light on the machine is currently off."
    }
}

fn locations_clause(placement: &Placement, labels: ObjectLabels) -> String {
    placement
        .iter()
        .enumerate()
        .map(|(i, on)| {
            let place = if on { "the machine" } else { "the floor" };
            format!("object {} is on {}", labels.label(i), place)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Observation line for an action.
///
/// `placement` is only consulted for [`Action::Look`], which re-describes the
/// room.
pub fn render_event(
    action: &Action,
    light_on: bool,
    placement: &Placement,
    options: RenderOptions,
) -> String {
    let labels = options.labels;
    match *action {
        Action::Put(i) => format!(
            "You put object {} on the machine. {}",
            labels.label(i),
            light_sentence(light_on)
        ),
        Action::Take(i) => {
            let off = match options.style {
                RenderStyle::OffThe => "off the machine",
                RenderStyle::OffOfThe => "off of the machine",
            };
            format!(
                "You took object {} {off}. {}",
                labels.label(i),
                light_sentence(light_on)
            )
        }
        Action::Exit => "Exiting the episode.".to_string(),
        Action::Look => format!(
            "You observe them: {}. The light on the machine is currently {}.",
            locations_clause(placement, labels),
            if light_on { "on" } else { "off" }
        ),
    }
}

pub const INVALID_OBJECT_TEXT: &str = "You don't see that object.";

/// Ground truth and dynamic state of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub blicket_mask: BlicketMask,
    pub rule: Rule,
    pub placement: Placement,
    pub light_on: bool,
    pub step: usize,
    pub horizon: usize,
    pub terminated: bool,
    #[serde(default)]
    pub render: RenderOptions,
}

/// Parameters of [`init_env`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    pub num_objects: usize,
    pub num_blickets: usize,
    pub rule: Rule,
    pub horizon: usize,
    pub seed: u64,
}

/// Draws a fresh episode: a uniform `num_blickets`-subset of blickets, and
/// each object on the machine independently with probability 0.1.
pub fn init_env(config: EnvConfig) -> Result<EnvState, EnvError> {
    let EnvConfig {
        num_objects,
        num_blickets,
        rule,
        horizon,
        seed,
    } = config;
    if num_objects == 0 || num_objects > MAX_OBJECTS {
        return Err(EnvError::InvalidConfig(format!(
            "num_objects must be in 1..={MAX_OBJECTS}, got {num_objects}"
        )));
    }
    if num_blickets > num_objects {
        return Err(EnvError::InvalidConfig(format!(
            "num_blickets ({num_blickets}) exceeds num_objects ({num_objects})"
        )));
    }
    if horizon == 0 {
        return Err(EnvError::InvalidConfig("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = index::sample(&mut rng, num_objects, num_blickets).into_vec();
    let mask = BlicketMask::from_indices(num_objects, &chosen);
    let mut placement = Placement::empty(num_objects);
    for i in 0..num_objects {
        if rng.random_bool(INITIAL_ON_MACHINE_PROB) {
            placement = placement.with(i, true);
        }
    }
    Ok(EnvState::new(mask, rule, placement, horizon))
}

impl EnvState {
    pub fn new(mask: BlicketMask, rule: Rule, placement: Placement, horizon: usize) -> Self {
        let light_on = machine_output(rule, &mask, &placement);
        Self {
            blicket_mask: mask,
            rule,
            placement,
            light_on,
            step: 0,
            horizon,
            terminated: false,
            render: RenderOptions::default(),
        }
    }

    pub fn with_render(mut self, render: RenderOptions) -> Self {
        self.render = render;
        self
    }

    pub fn num_objects(&self) -> usize {
        self.placement.len()
    }

    /// True once no further action will be accepted.
    pub fn is_closed(&self) -> bool {
        self.terminated || self.step >= self.horizon
    }

    /// Applies one action and returns the successor state with its event.
    ///
    /// An object index outside the room is not an error: the step is consumed
    /// and the event reads "You don't see that object.".
    pub fn apply_action(&self, action: Action) -> Result<(EnvState, Event), EnvError> {
        if self.is_closed() {
            return Err(EnvError::EpisodeClosed {
                step: self.step,
                horizon: self.horizon,
                terminated: self.terminated,
            });
        }
        let mut next = self.clone();
        next.step += 1;
        let command = action.command_text(self.render.labels);

        if let Some(i) = action.object() {
            if i >= self.num_objects() {
                let event = Event {
                    action,
                    command,
                    text: INVALID_OBJECT_TEXT.to_string(),
                    light_on: next.light_on,
                    placement: next.placement,
                    outcome: Outcome::InvalidObject,
                };
                return Ok((next, event));
            }
        }

        match action {
            Action::Put(i) => next.placement = next.placement.with(i, true),
            Action::Take(i) => next.placement = next.placement.with(i, false),
            Action::Look => {}
            Action::Exit => next.terminated = true,
        }
        next.light_on = machine_output(next.rule, &next.blicket_mask, &next.placement);
        let text = render_event(&action, next.light_on, &next.placement, self.render);
        let event = Event {
            action,
            command,
            text,
            light_on: next.light_on,
            placement: next.placement,
            outcome: Outcome::Applied,
        };
        Ok((next, event))
    }
}

/// Opening description of the room.
pub fn render_initial_observation(state: &EnvState, variant: OpeningVariant) -> String {
    let n = state.num_objects();
    let locs = locations_clause(&state.placement, state.render.labels);
    let light = if state.light_on { "on" } else { "off" };
    let objects = if n == 1 { "object" } else { "objects" };
    let hum = format!(
        "The machine hums softly in front of you, seemingly waiting. The light on the machine is currently {light}. You wonder if there is a relationship between the objects and the machine."
    );
    match variant {
        OpeningVariant::Default => format!(
            "You are in a room. You see a machine at the center of this room. \n\nThere are also {n} {objects} scattered around the room. You observe them: {locs}. \n\n{hum}"
        ),
        OpeningVariant::Training => format!(
            "You are in a room. You see a machine at the center of this room.\n\nThere are also {n} {objects} scattered around the room. You observe them: {locs}. {hum}"
        ),
        OpeningVariant::Test => format!(
            "You are in a new room. You see the same machine as the one you previously saw at the center of this room.\n\nYou now have {n} different {objects} scattered around the room. You observe them: {locs}. {hum}"
        ),
    }
}

/// Growing agent-visible text of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    text: String,
}

impl Transcript {
    /// Starts with the opening paragraph followed by `separator`
    /// (a blank line, `"\n\n"`, in the standard layout).
    pub fn new(opening: &str, separator: &str) -> Self {
        Self {
            text: format!("{opening}{separator}"),
        }
    }

    pub fn push(&mut self, event: &Event) {
        self.text.push_str(&event.transcript_lines());
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

static PUT_ON_MACHINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^put\s+(?:object\s+)?([a-z0-9]+)\s+on(?:to)?\s+(?:the\s+)?machine$").unwrap()
});
static PUT_ON_FLOOR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^put\s+(?:object\s+)?([a-z0-9]+)\s+on\s+(?:the\s+)?floor$").unwrap()
});
static TAKE_OFF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^take\s+(?:object\s+)?([a-z0-9]+)\s+off\s+(?:of\s+)?(?:the\s+)?machine$").unwrap()
});

/// Extracts an action from free-form agent output.
///
/// Uses the last line starting with `>` (the whole text when there is none).
pub fn parse_command(text: &str, num_objects: usize) -> Result<Action, CommandError> {
    let line = text
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('>'))
        .map(|l| l.trim_start_matches('>'))
        .unwrap_or(text);
    let cleaned = line
        .trim()
        .trim_matches(|c: char| matches!(c, '`' | '"' | '\'' | '*'))
        .trim_end_matches(['.', '!'])
        .trim()
        .to_ascii_lowercase();
    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");

    let object = |caps: regex::Captures<'_>, make: fn(usize) -> Action| {
        let index = ObjectLabels::index_of(&caps[1])
            .ok_or_else(|| CommandError::Unparseable(text.to_string()))?;
        let action = make(index);
        if index >= num_objects {
            return Err(CommandError::InvalidObject {
                action,
                num_objects,
            });
        }
        Ok(action)
    };

    if cleaned == "look" {
        Ok(Action::Look)
    } else if cleaned == "exit" {
        Ok(Action::Exit)
    } else if let Some(caps) = PUT_ON_MACHINE.captures(&cleaned) {
        object(caps, Action::Put)
    } else if let Some(caps) = PUT_ON_FLOOR.captures(&cleaned) {
        object(caps, Action::Take)
    } else if let Some(caps) = TAKE_OFF.captures(&cleaned) {
        object(caps, Action::Take)
    } else {
        Err(CommandError::Unparseable(text.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(s: &str) -> ObjectFlags {
        s.parse().unwrap()
    }

    #[test]
    fn machine_output_examples() {
        let mask = BlicketMask::from_indices(3, &[1, 2]);
        assert!(!machine_output(Rule::Conjunctive, &mask, &flags("110")));
        assert!(machine_output(Rule::Conjunctive, &mask, &flags("011")));
        let empty = BlicketMask::empty(3);
        for bits in 0..8 {
            let p = Placement::from_bits(3, bits);
            assert!(!machine_output(Rule::Disjunctive, &empty, &p));
            assert!(machine_output(Rule::Conjunctive, &empty, &p));
        }
    }

    #[test]
    #[should_panic]
    fn machine_output_length_mismatch_panics() {
        machine_output(Rule::Disjunctive, &flags("01"), &flags("011"));
    }

    #[test]
    fn init_is_deterministic_and_respects_cardinality() {
        let cfg = EnvConfig {
            num_objects: 4,
            num_blickets: 2,
            rule: Rule::Disjunctive,
            horizon: 32,
            seed: 17,
        };
        assert_eq!(init_env(cfg).unwrap(), init_env(cfg).unwrap());
        for seed in 0..200 {
            let s = init_env(EnvConfig {
                num_objects: 3,
                rule: Rule::Conjunctive,
                seed,
                ..cfg
            })
            .unwrap();
            assert_eq!(s.blicket_mask.count_ones(), 2);
            assert_eq!(
                s.light_on,
                machine_output(s.rule, &s.blicket_mask, &s.placement)
            );
        }
    }

    #[test]
    fn init_rejects_bad_config() {
        let cfg = EnvConfig {
            num_objects: 2,
            num_blickets: 3,
            rule: Rule::Disjunctive,
            horizon: 32,
            seed: 0,
        };
        assert!(matches!(init_env(cfg), Err(EnvError::InvalidConfig(_))));
        assert!(init_env(EnvConfig {
            num_blickets: 1,
            horizon: 0,
            ..cfg
        })
        .is_err());
        assert!(init_env(EnvConfig {
            num_objects: 25,
            num_blickets: 1,
            ..cfg
        })
        .is_err());
    }

    #[test]
    fn put_renders_light_line() {
        let s = EnvState::new(
            BlicketMask::from_indices(3, &[1, 2]),
            Rule::Conjunctive,
            flags("110"),
            32,
        );
        let (next, ev) = s.apply_action(Action::Put(2)).unwrap();
        assert!(next.light_on);
        assert_eq!(
            ev.text,
            "You put object 2 on the machine. The light on the machine is now on."
        );
        assert_eq!(next.step, 1);
    }

    #[test]
    fn render_event_examples() {
        let p = Placement::empty(3);
        let opts = RenderOptions::default();
        assert_eq!(
            render_event(&Action::Take(0), true, &p, opts),
            "You took object 0 off the machine. The light on the machine is now on."
        );
        assert_eq!(
            render_event(&Action::Put(1), false, &p, opts),
            "You put object 1 on the machine. The light on the machine is currently off."
        );
        assert_eq!(
            render_event(&Action::Exit, true, &p, opts),
            "Exiting the episode."
        );
        let of = RenderOptions {
            style: RenderStyle::OffOfThe,
            ..opts
        };
        assert_eq!(
            render_event(&Action::Take(1), false, &p, of),
            "You took object 1 off of the machine. The light on the machine is currently off."
        );
    }

    #[test]
    fn exit_terminates_and_closes() {
        let s = EnvState::new(flags("01"), Rule::Disjunctive, flags("00"), 32);
        let (next, ev) = s.apply_action(Action::Exit).unwrap();
        assert!(next.terminated);
        assert_eq!(ev.text, "Exiting the episode.");
        assert!(matches!(
            next.apply_action(Action::Look),
            Err(EnvError::EpisodeClosed { .. })
        ));
    }

    #[test]
    fn look_changes_nothing_but_the_step() {
        let s = EnvState::new(flags("01"), Rule::Disjunctive, flags("01"), 32);
        let (next, ev) = s.apply_action(Action::Look).unwrap();
        assert_eq!(next.placement, s.placement);
        assert_eq!(next.step, 1);
        assert_eq!(
            ev.text,
            "You observe them: object 0 is on the floor, object 1 is on the machine. The light on the machine is currently on."
        );
    }

    #[test]
    fn redundant_and_invalid_moves_consume_a_step() {
        let s = EnvState::new(flags("01"), Rule::Disjunctive, flags("01"), 2);
        let (next, ev) = s.apply_action(Action::Put(1)).unwrap();
        assert_eq!(next.placement, s.placement);
        assert_eq!(ev.outcome, Outcome::Applied);
        let (last, ev) = next.apply_action(Action::Take(7)).unwrap();
        assert_eq!(ev.text, INVALID_OBJECT_TEXT);
        assert_eq!(ev.outcome, Outcome::InvalidObject);
        assert_eq!(last.step, 2);
        assert!(last.is_closed());
        assert!(last.apply_action(Action::Look).is_err());
    }

    #[test]
    fn opening_with_one_object_on_machine() {
        let s = EnvState::new(flags("100"), Rule::Disjunctive, flags("100"), 32);
        let text = render_initial_observation(&s, OpeningVariant::Default);
        assert!(text.contains("object 0 is on the machine, object 1 is on the floor"));
        assert!(text.contains("The light on the machine is currently on."));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_command("> put object 0 on machine", 8),
            Ok(Action::Put(0))
        );
        assert_eq!(
            parse_command("> take object 3 off of machine", 8),
            Ok(Action::Take(3))
        );
        assert_eq!(
            parse_command("I think we should exit now\n> exit", 8),
            Ok(Action::Exit)
        );
        assert_eq!(
            parse_command("> Put Object 2 On The Machine.", 3),
            Ok(Action::Put(2))
        );
        assert_eq!(
            parse_command("put object 1 on the floor", 3),
            Ok(Action::Take(1))
        );
        assert_eq!(
            parse_command("> put object A on machine", 3),
            Ok(Action::Put(0))
        );
        assert_eq!(parse_command("  > LOOK  ", 3), Ok(Action::Look));
        assert_eq!(
            parse_command("> put object 9 on machine", 3),
            Err(CommandError::InvalidObject {
                action: Action::Put(9),
                num_objects: 3
            })
        );
        assert!(matches!(
            parse_command("I am not sure what to do", 3),
            Err(CommandError::Unparseable(_))
        ));
    }

    #[test]
    fn flags_string_round_trip() {
        let f = flags("0110");
        assert_eq!(f.to_string(), "0110");
        assert_eq!(f.to_vec(), vec![false, true, true, false]);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, "\"0110\"");
        assert_eq!(serde_json::from_str::<ObjectFlags>(&json).unwrap(), f);
    }
}
