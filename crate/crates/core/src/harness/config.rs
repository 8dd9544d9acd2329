use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    Agent, ChatAgent, ChatAgentConfig, CountBasedAgent, CountMode, OracleAgent, RandomAgent,
    ReplayAgent, SamplingAgent, SamplingConfig,
};
use crate::backend::{BackendConfig, ChatBackend};
use crate::env::{Action, BlicketMask, ObjectLabels, Placement, RenderStyle, Rule};
use crate::prompts::{PromptStyle, SystemVariant};

use super::TrialError;

/// Which policy plays the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Oracle,
    Random,
    CountBased,
    Chat,
    Sampling,
    Replay,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Oracle,
        AgentKind::Random,
        AgentKind::CountBased,
        AgentKind::Chat,
        AgentKind::Sampling,
        AgentKind::Replay,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentKind::Oracle => "oracle",
            AgentKind::Random => "random",
            AgentKind::CountBased => "count_based",
            AgentKind::Chat => "chat",
            AgentKind::Sampling => "sampling",
            AgentKind::Replay => "replay",
        }
    }

    pub fn needs_backend(&self) -> bool {
        matches!(self, AgentKind::Chat | AgentKind::Sampling)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| format!("unknown agent kind {s:?}"))
    }
}

/// Sampling-agent knobs carried by a trial config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub target_sample_count: usize,
    pub call_budget: usize,
    #[serde(default = "default_verification")]
    pub verification_steps: usize,
}

fn default_verification() -> usize {
    SamplingConfig::default().verification_steps
}

impl Default for SamplingParams {
    fn default() -> Self {
        let d = SamplingConfig::default();
        Self {
            target_sample_count: d.target_sample_count,
            call_budget: d.call_budget,
            verification_steps: d.verification_steps,
        }
    }
}

fn default_blickets() -> usize {
    2
}

fn default_horizon() -> usize {
    32
}

fn default_retries() -> usize {
    2
}

fn is_default<T: Default + PartialEq>(value: &T) -> bool {
    *value == T::default()
}

/// Everything needed to reproduce one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub num_objects: usize,
    #[serde(default = "default_blickets")]
    pub num_blickets: usize,
    pub rule: Rule,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub system_message_variant: SystemVariant,
    #[serde(default)]
    pub prompting_style: PromptStyle,
    pub agent_kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub render_style: RenderStyle,
    #[serde(default, skip_serializing_if = "is_default")]
    pub labels: ObjectLabels,
    #[serde(default, skip_serializing_if = "is_default")]
    pub count_mode: CountMode,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sampling: SamplingParams,
    #[serde(default = "default_retries")]
    pub max_parse_retries: usize,
    /// Overrides the seeded blicket draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_blickets: Option<BlicketMask>,
    /// Overrides the seeded initial placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_placement: Option<Placement>,
    /// Action list for the replay agent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replay_actions: Vec<Action>,
}

impl TrialConfig {
    pub fn new(num_objects: usize, rule: Rule, agent_kind: AgentKind, seed: u64) -> Self {
        Self {
            num_objects,
            num_blickets: default_blickets().min(num_objects),
            rule,
            horizon: default_horizon(),
            system_message_variant: SystemVariant::default(),
            prompting_style: PromptStyle::default(),
            agent_kind,
            backend: None,
            seed,
            render_style: RenderStyle::default(),
            labels: ObjectLabels::default(),
            count_mode: CountMode::default(),
            sampling: SamplingParams::default(),
            max_parse_retries: default_retries(),
            fixed_blickets: None,
            fixed_placement: None,
            replay_actions: Vec::new(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        let fail = |msg: String| Err(TrialError::Config(msg));
        if self.num_objects == 0 || self.num_objects > crate::env::MAX_OBJECTS {
            return fail(format!("num_objects out of range: {}", self.num_objects));
        }
        if self.num_blickets > self.num_objects {
            return fail(format!(
                "num_blickets ({}) exceeds num_objects ({})",
                self.num_blickets, self.num_objects
            ));
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        for (what, flags) in [
            ("fixed_blickets", self.fixed_blickets),
            ("fixed_placement", self.fixed_placement),
        ] {
            if let Some(flags) = flags {
                if flags.len() != self.num_objects {
                    return fail(format!("{what} has {} entries", flags.len()));
                }
            }
        }
        Ok(())
    }

    /// Independent stream for the agent, derived from the trial seed.
    pub fn agent_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }
}

/// Instantiates the agent described by `config`.
pub fn build_agent(
    config: &TrialConfig,
    backend: Option<Arc<dyn ChatBackend>>,
) -> Result<Box<dyn Agent>, TrialError> {
    let backend = || {
        backend.clone().ok_or_else(|| {
            TrialError::Config(format!("agent kind {} needs a backend", config.agent_kind))
        })
    };
    Ok(match config.agent_kind {
        AgentKind::Oracle => Box::new(
            OracleAgent::new(config.num_objects).map_err(|e| TrialError::Config(e.to_string()))?,
        ),
        AgentKind::Random => Box::new(RandomAgent::new(config.agent_rng())),
        AgentKind::CountBased => Box::new(CountBasedAgent::new(
            config.num_objects,
            config.count_mode,
            config.agent_rng(),
        )),
        AgentKind::Replay => Box::new(ReplayAgent::new(config.replay_actions.clone())),
        AgentKind::Chat => Box::new(ChatAgent::new(
            backend()?,
            ChatAgentConfig {
                system_variant: config.system_message_variant,
                style: config.prompting_style,
                horizon: config.horizon,
                max_parse_retries: config.max_parse_retries,
            },
        )),
        AgentKind::Sampling => Box::new(SamplingAgent::new(
            backend()?,
            SamplingConfig {
                target_sample_count: config.sampling.target_sample_count,
                call_budget: config.sampling.call_budget,
                max_parse_retries: config.max_parse_retries,
                system_variant: config.system_message_variant,
                horizon: config.horizon,
                verification_steps: config.sampling.verification_steps,
            },
        )),
    })
}
