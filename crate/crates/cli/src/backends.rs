//! Backend selection file for `run` and `scenarios`.
//!
//! ```toml
//! kind = "http"                 # http | scripted | simulated | replay
//! record_sessions = "sessions"  # optional, http only
//!
//! [http]
//! endpoint_url = "https://api.openai.com/v1"
//! model_name = "gpt-4o"
//! api_key_env_var = "OPENAI_API_KEY"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use blicket_core::backend::{
    BackendConfig, ChatBackend, HttpBackend, RecordingBackend, ReplayBackend, ScriptedBackend,
    SimulatedSampler,
};
use blicket_core::env::Rule;
use blicket_core::hypothesis::HypothesisSpace;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
    Simulated,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    #[default]
    Full,
    Disjunctive,
    Conjunctive,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSpec {
    /// JSON array of `{"matcher", "reply", "repeat"}` entries, reloaded per trial.
    pub script: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatedSpec {
    #[serde(default)]
    pub pool: Pool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    /// Directory of `seed-<seed>.jsonl` session recordings.
    pub sessions: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendFile {
    pub kind: BackendKind,
    #[serde(default)]
    pub record_sessions: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<BackendConfig>,
    #[serde(default)]
    pub scripted: Option<ScriptedSpec>,
    #[serde(default)]
    pub simulated: Option<SimulatedSpec>,
    #[serde(default)]
    pub replay: Option<ReplaySpec>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn session_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}.jsonl"))
}

/// Parses TOML without echoing source lines, which may hold secrets.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        match line {
            Some(line) => anyhow::anyhow!("{}:{line}: {}", path.display(), e.message()),
            None => anyhow::anyhow!("{}: {}", path.display(), e.message()),
        }
    })
}

impl BackendFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading backend config {}", path.display()))?;
        let mut file: BackendFile = parse_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(s) = &mut file.scripted {
            s.script = resolve(base, &s.script);
        }
        if let Some(r) = &mut file.replay {
            r.sessions = resolve(base, &r.sessions);
        }
        if let Some(dir) = &mut file.record_sessions {
            *dir = resolve(base, dir);
        }
        Ok(file)
    }

    /// Endpoint settings worth recording alongside each trial.
    pub fn http_config(&self) -> Option<&BackendConfig> {
        (self.kind == BackendKind::Http)
            .then_some(self.http.as_ref())
            .flatten()
    }

    /// Builds whatever can be shared across trials and returns a per-seed
    /// factory.
    pub fn factory(&self, num_objects: usize) -> Result<Factory> {
        Ok(match self.kind {
            BackendKind::Http => {
                let config = self
                    .http
                    .clone()
                    .context("kind = \"http\" needs an [http] table")?;
                let shared: Arc<dyn ChatBackend> = Arc::new(HttpBackend::new(config)?);
                if let Some(dir) = &self.record_sessions {
                    std::fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                }
                Factory::Http {
                    shared,
                    record: self.record_sessions.clone(),
                }
            }
            BackendKind::Scripted => {
                let spec = self
                    .scripted
                    .as_ref()
                    .context("kind = \"scripted\" needs a [scripted] table")?;
                let json = std::fs::read_to_string(&spec.script)
                    .with_context(|| format!("reading script {}", spec.script.display()))?;
                ScriptedBackend::from_json(&json)?;
                Factory::Scripted(json)
            }
            BackendKind::Simulated => {
                let pool = self.simulated.clone().unwrap_or_default().pool;
                let space = HypothesisSpace::new(num_objects)?;
                let hypotheses = space
                    .iter()
                    .filter(|h| match pool {
                        Pool::Full => true,
                        Pool::Disjunctive => h.rule == Rule::Disjunctive,
                        Pool::Conjunctive => h.rule == Rule::Conjunctive,
                    })
                    .collect();
                Factory::Simulated(SimulatedSampler::new(num_objects, hypotheses))
            }
            BackendKind::Replay => {
                let spec = self
                    .replay
                    .as_ref()
                    .context("kind = \"replay\" needs a [replay] table")?;
                Factory::Replay(spec.sessions.clone())
            }
        })
    }
}

pub enum Factory {
    Http {
        shared: Arc<dyn ChatBackend>,
        record: Option<PathBuf>,
    },
    Scripted(String),
    Simulated(SimulatedSampler),
    Replay(PathBuf),
}

impl Factory {
    /// Fresh backend state for the trial with `seed`.
    pub fn for_seed(&self, seed: u64) -> Result<Arc<dyn ChatBackend>> {
        Ok(match self {
            Factory::Http {
                shared,
                record: None,
            } => Arc::clone(shared),
            Factory::Http {
                shared,
                record: Some(dir),
            } => {
                let path = session_path(dir, seed);
                if path.exists() {
                    std::fs::remove_file(&path)?;
                }
                Arc::new(RecordingBackend::new(Arc::clone(shared), &path)?)
            }
            Factory::Scripted(json) => Arc::new(ScriptedBackend::from_json(json)?),
            Factory::Simulated(sim) => Arc::new(sim.clone()),
            Factory::Replay(dir) => {
                let path = session_path(dir, seed);
                if !path.exists() {
                    bail!("no recorded session at {}", path.display());
                }
                Arc::new(ReplayBackend::open(&path)?)
            }
        })
    }
}
