use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

use super::{BackendError, ChatBackend, ChatMessage, Completion, Usage};

/// Connection settings for a chat-completions endpoint.
///
/// The API key is never stored here; `api_key_env_var` names the environment
/// variable it is read from (leave it empty for servers without auth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_api_key_env_var")]
    pub api_key_env_var: String,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Opaque provider-specific fields merged into the request body.
    #[serde(default)]
    pub extra: BTreeMap<String, Value>,
}

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_api_key_env_var() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_max_retries() -> u32 {
    4
}

impl BackendConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            api_key_env_var: default_api_key_env_var(),
            request_timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            extra: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.request_timeout_secs.is_nan() || self.request_timeout_secs <= 0.0 {
            return Err(BackendError::Config(
                "request_timeout_secs must be positive".into(),
            ));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(BackendError::Config("endpoint_url is empty".into()));
        }
        if let Some(key) = self.extra.keys().find(|k| looks_like_credential(k)) {
            return Err(BackendError::Config(format!(
                "extra field {key:?} looks like a credential; put the key in the environment variable named by api_key_env_var"
            )));
        }
        Ok(())
    }
}

fn looks_like_credential(name: &str) -> bool {
    let name = name.to_ascii_lowercase();
    ["key", "token", "secret", "password", "authorization"]
        .iter()
        .any(|w| name.contains(w))
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(flatten)]
    extra: &'a BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// JSON body sent for `messages`; identical inputs give identical bytes.
pub fn request_body(config: &BackendConfig, messages: &[ChatMessage]) -> String {
    serde_json::to_string(&ChatRequest {
        model: &config.model_name,
        messages,
        temperature: config.temperature,
        max_tokens: config.max_output_tokens,
        extra: &config.extra,
    })
    .expect("request always serializes")
}

fn parse_response(body: &str) -> Result<Completion, BackendError> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Decode(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Decode("response has no choices".into()))?;
    Ok(Completion {
        text: choice.message.content.unwrap_or_default(),
        usage: parsed.usage,
    })
}

/// Blocking client for `POST {endpoint_url}/chat/completions`.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    backoff: Duration,
}

impl HttpBackend {
    /// Validates the config and reads the API key. Fails before any network
    /// traffic if the named variable is unset.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = if config.api_key_env_var.is_empty() {
            None
        } else {
            Some(std::env::var(&config.api_key_env_var).map_err(|_| {
                BackendError::Config(format!(
                    "environment variable {} is not set",
                    config.api_key_env_var
                ))
            })?)
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            api_key,
            agent,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay of the exponential backoff between retries.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.endpoint_url.trim_end_matches('/')
        )
    }

    fn send_once(&self, body: &str) -> Result<(u16, String), String> {
        let mut request = self
            .agent
            .post(&self.url())
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::Config("no messages to send".into()));
        }
        let body = request_body(&self.config, messages);
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.backoff * 2u32.saturating_pow(attempt - 1);
                std::thread::sleep(delay.min(Duration::from_secs(30)));
            }
            match self.send_once(&body) {
                Ok((200..=299, text)) => return parse_response(&text),
                Ok((status, text)) if status == 429 || status >= 500 => {
                    warn!(status, attempt, "transient HTTP failure, retrying");
                    last_error = format!("HTTP {status}: {text}");
                }
                Ok((status, text)) => return Err(BackendError::Http { status, body: text }),
                Err(e) => {
                    warn!(error = %e, attempt, "transport failure, retrying");
                    last_error = e;
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last_error,
        })
    }
}
