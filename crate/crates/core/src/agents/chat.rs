use tracing::warn;

use crate::backend::{ChatBackend, ChatMessage, Completion};
use crate::env::{parse_command, Action, CommandError};
use crate::prompts::{
    exploration_prompt, question_prompt, system_message, PromptStyle, SystemVariant,
};

use super::{
    parse_answer, Agent, AgentDecision, AgentError, Answer, OutputKind, QaContext, RawOutput,
    StepContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChatAgentConfig {
    pub system_variant: SystemVariant,
    pub style: PromptStyle,
    pub horizon: usize,
    /// Extra attempts after a reply that does not parse.
    pub max_parse_retries: usize,
}

impl Default for ChatAgentConfig {
    fn default() -> Self {
        Self {
            system_variant: SystemVariant::HumanDefault,
            style: PromptStyle::Default,
            horizon: 32,
            max_parse_retries: 2,
        }
    }
}

pub(super) fn raw(kind: OutputKind, completion: &Completion) -> RawOutput {
    RawOutput {
        kind,
        text: completion.text.clone(),
        completion_tokens: completion.usage.and_then(|u| u.completion_tokens),
    }
}

/// Sends `messages` until the reply parses as a command, at most
/// `1 + retries` times; falls back to LOOK.
pub(super) fn request_action<B: ChatBackend + ?Sized>(
    backend: &B,
    messages: &[ChatMessage],
    num_objects: usize,
    retries: usize,
) -> Result<AgentDecision, AgentError> {
    let mut decision = AgentDecision::new(Action::Look);
    for _ in 0..=retries {
        let completion = backend.complete(messages)?;
        decision
            .raw_outputs
            .push(raw(OutputKind::Action, &completion));
        match parse_command(&completion.text, num_objects) {
            Ok(action) | Err(CommandError::InvalidObject { action, .. }) => {
                decision.action = action;
                decision.rationale_text = Some(completion.text);
                return Ok(decision);
            }
            Err(CommandError::Unparseable(_)) => decision.parse_failures += 1,
        }
    }
    warn!(
        attempts = retries + 1,
        "no parseable command, falling back to look"
    );
    decision.rationale_text = decision.raw_outputs.last().map(|r| r.text.clone());
    Ok(decision)
}

/// Sends `messages` until a `> True/False` parses, with one retry.
pub(super) fn request_answer<B: ChatBackend + ?Sized>(
    backend: &B,
    messages: &[ChatMessage],
) -> Result<Answer, AgentError> {
    let mut answer = Answer {
        value: None,
        raw_outputs: Vec::new(),
    };
    for _ in 0..2 {
        let completion = backend.complete(messages)?;
        answer
            .raw_outputs
            .push(raw(OutputKind::Answer, &completion));
        if let Some(value) = parse_answer(&completion.text) {
            answer.value = Some(value);
            return Ok(answer);
        }
    }
    warn!("no parseable answer, counting the question as wrong");
    Ok(answer)
}

/// Plays the game through a chat backend.
///
/// Each turn sends the system message and one user message holding the
/// transcript so far and the turn prompt.
pub struct ChatAgent<B> {
    backend: B,
    config: ChatAgentConfig,
    system: String,
}

impl<B: ChatBackend> ChatAgent<B> {
    pub fn new(backend: B, config: ChatAgentConfig) -> Self {
        let system = system_message(config.system_variant, config.horizon);
        Self {
            backend,
            config,
            system,
        }
    }

    pub fn system_message(&self) -> &str {
        &self.system
    }
}

impl<B: ChatBackend> Agent for ChatAgent<B> {
    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<AgentDecision, AgentError> {
        let messages = [
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(exploration_prompt(ctx.transcript, self.config.style)),
        ];
        request_action(
            &self.backend,
            &messages,
            ctx.num_objects(),
            self.config.max_parse_retries,
        )
    }

    fn answer(&mut self, ctx: &QaContext<'_>) -> Result<Answer, AgentError> {
        let label = ctx.labels.label(ctx.object);
        let messages = [
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(question_prompt(ctx.transcript, &label, self.config.style)),
        ];
        request_answer(&self.backend, &messages)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::env::Placement;

    fn ctx<'a>(placement: Placement) -> StepContext<'a> {
        StepContext {
            transcript: "You are in a room.\n\n",
            placement,
            observations: &[],
            step: 0,
            horizon: 32,
            labels: Default::default(),
        }
    }

    #[test]
    fn parses_replies() {
        let backend = ScriptedBackend::from_replies([
            "> exit",
            "Let me think.\nObject 2 looks promising.\n> put object 2 on machine",
        ]);
        let mut agent = ChatAgent::new(backend, ChatAgentConfig::default());
        let p: Placement = "000".parse().unwrap();
        assert_eq!(agent.decide(&ctx(p)).unwrap().action, Action::Exit);
        let d = agent.decide(&ctx(p)).unwrap();
        assert_eq!(d.action, Action::Put(2));
        assert!(d.rationale_text.unwrap().starts_with("Let me think."));
    }

    #[test]
    fn garbage_falls_back_to_look() {
        let backend = ScriptedBackend::from_replies(["uh", "hmm", "no idea"]);
        let mut agent = ChatAgent::new(backend, ChatAgentConfig::default());
        let d = agent.decide(&ctx("000".parse().unwrap())).unwrap();
        assert_eq!(d.action, Action::Look);
        assert_eq!(d.parse_failures, 3);
        assert_eq!(d.raw_outputs.len(), 3);
    }

    #[test]
    fn retry_recovers() {
        let backend = ScriptedBackend::from_replies(["uh", "> look"]);
        let mut agent = ChatAgent::new(backend, ChatAgentConfig::default());
        let d = agent.decide(&ctx("000".parse().unwrap())).unwrap();
        assert_eq!(d.action, Action::Look);
        assert_eq!(d.parse_failures, 1);
    }

    #[test]
    fn invalid_object_is_passed_through() {
        let backend = ScriptedBackend::from_replies(["> put object 7 on machine"]);
        let mut agent = ChatAgent::new(backend, ChatAgentConfig::default());
        let d = agent.decide(&ctx("000".parse().unwrap())).unwrap();
        assert_eq!(d.action, Action::Put(7));
        assert_eq!(d.parse_failures, 0);
    }

    #[test]
    fn backend_failure_propagates() {
        let mut agent = ChatAgent::new(ScriptedBackend::new(), ChatAgentConfig::default());
        assert!(matches!(
            agent.decide(&ctx("000".parse().unwrap())),
            Err(AgentError::Backend(_))
        ));
    }

    #[test]
    fn answers_with_one_retry() {
        let backend =
            ScriptedBackend::from_replies(["> True", "maybe", "still unsure", "x", "> False"]);
        let mut agent = ChatAgent::new(backend, ChatAgentConfig::default());
        let qa = |object| QaContext {
            transcript: "t\n",
            observations: &[],
            num_objects: 3,
            object,
            labels: Default::default(),
        };
        assert_eq!(agent.answer(&qa(0)).unwrap().value, Some(true));
        let unparsed = agent.answer(&qa(1)).unwrap();
        assert_eq!(unparsed.value, None);
        assert_eq!(unparsed.raw_outputs.len(), 2);
        assert_eq!(agent.answer(&qa(2)).unwrap().value, Some(false));
    }
}
