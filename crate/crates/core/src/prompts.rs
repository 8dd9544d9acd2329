//! Prompt templates with `#NAME#` placeholders.
//!
//! The shipped texts live in `templates/` and are compiled in; each one is
//! pinned by SHA-256 so accidental edits show up as test failures.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template:?} uses unknown placeholder(s): {names:?}")]
    UnknownPlaceholder {
        template: String,
        names: Vec<String>,
    },
    #[error("template {template:?} is missing binding(s) for: {names:?}")]
    MissingBinding {
        template: String,
        names: Vec<String>,
    },
    #[error("template {name:?} does not match its pinned hash")]
    HashMismatch { name: String },
}

/// Placeholder names a template may use.
pub const KNOWN_PLACEHOLDERS: &[&str] = &[
    "INITIAL_MESSAGE",
    "TIPS",
    "HORIZON",
    "NUM_OBJECTS",
    "NUM_HYPOTHESES",
    "HISTORY",
    "ACTIVE_HYPOTHESES",
    "ELIMINATED_HYPOTHESES",
    "QUESTION",
];

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#([A-Z_]+)#").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

impl PromptTemplate {
    /// Rejects bodies that use placeholders outside [`KNOWN_PLACEHOLDERS`].
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let template = Self {
            name: name.into(),
            body: body.into(),
        };
        let unknown: Vec<String> = template
            .placeholders()
            .into_iter()
            .filter(|p| !KNOWN_PLACEHOLDERS.contains(&p.as_str()))
            .collect();
        if !unknown.is_empty() {
            return Err(TemplateError::UnknownPlaceholder {
                template: template.name,
                names: unknown,
            });
        }
        Ok(template)
    }

    /// Distinct placeholder names in the body, sorted.
    pub fn placeholders(&self) -> BTreeSet<String> {
        PLACEHOLDER
            .captures_iter(&self.body)
            .map(|c| c[1].to_string())
            .collect()
    }

    pub fn instantiate(&self, bindings: &HashMap<&str, String>) -> Result<String, TemplateError> {
        instantiate_prompt(self, bindings)
    }
}

/// Single-pass substitution of every `#NAME#`. Extra bindings are ignored;
/// substituted text is not rescanned.
pub fn instantiate_prompt(
    template: &PromptTemplate,
    bindings: &HashMap<&str, String>,
) -> Result<String, TemplateError> {
    let missing: Vec<String> = template
        .placeholders()
        .into_iter()
        .filter(|p| !bindings.contains_key(p.as_str()))
        .collect();
    if !missing.is_empty() {
        return Err(TemplateError::MissingBinding {
            template: template.name.clone(),
            names: missing,
        });
    }
    Ok(PLACEHOLDER
        .replace_all(&template.body, |caps: &regex::Captures<'_>| {
            bindings[&caps[1]].clone()
        })
        .into_owned())
}

macro_rules! shipped {
    ($($name:literal => $hash:literal),* $(,)?) => {
        /// `(name, body, sha256)` of every shipped template.
        pub const SHIPPED_TEMPLATES: &[(&str, &str, &str)] = &[
            $(($name, include_str!(concat!("../templates/", $name, ".txt")), $hash)),*
        ];
    };
}

shipped! {
    "system_frame" => "44b91d09925c21e9892c08f5d3981f6b4537c40a4bdbcca1cf7e80d0c5bfa6d9",
    "human_default_initial" => "72cc85ed11e7fcbc2c928b921df0546d255f643e651d2dab8274b38cf89df891",
    "human_default_tips" => "459e5bebcb014a1c05108dc2008d9aab91a05bef23c33ae16dc29af5b90aa533",
    "human_conjunctive_initial" => "20a68e4088a70a8986beea1676347b9ce992ea651bb1982cb4efcc02bf0eb746",
    "human_conjunctive_tips" => "459e5bebcb014a1c05108dc2008d9aab91a05bef23c33ae16dc29af5b90aa533",
    "math_definition_initial" => "20a68e4088a70a8986beea1676347b9ce992ea651bb1982cb4efcc02bf0eb746",
    "math_definition_tips" => "ddefa25e5959da8e86cb34859526d0d86a47370eb06a4834723f84e4c93f08e1",
    "style_default" => "aed61ee24d3ae14ca57119f47fcca3547cb3e798797ce8b81ca14417649dc0b5",
    "style_react" => "c4c3cc809729291d5557bab2960827a09a67c1145336baf8d3e078feabd56d82",
    "style_reflexion" => "5b533121abdae3963123b56cbcc00b4d642624436abdbb377f1a7f00831ba46e",
    "style_cot" => "cd2cb16288ac93619c4f7cdc8bb88900c698ee0790b450d04d820ee1a1edbd67",
    "sampling_generate" => "be9ba7a27f75e5c23f24c27169e47fbbc0479ac15e0601d17531f58d01a4b633",
    "sampling_act" => "92be917f20d5fe2f9b5cc1bcf7e8356331d361e26f793b96c961c3ff8e825780",
    "sampling_answer" => "d0ab8a4b1b6c247ca71069c60f0c6b89813badf8847a0446262ec1e1c7246873",
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Checks every shipped template against its pinned hash.
pub fn verify_templates() -> Result<(), TemplateError> {
    for (name, body, hash) in SHIPPED_TEMPLATES {
        if sha256_hex(body) != *hash {
            return Err(TemplateError::HashMismatch {
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

/// A shipped template by name.
pub fn shipped_template(name: &str) -> Option<PromptTemplate> {
    SHIPPED_TEMPLATES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(n, body, _)| PromptTemplate {
            name: n.to_string(),
            body: body.to_string(),
        })
}

fn shipped_body(name: &str) -> &'static str {
    SHIPPED_TEMPLATES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, body, _)| *body)
        .unwrap_or_else(|| panic!("no shipped template named {name}"))
}

/// Which system message frames the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemVariant {
    #[default]
    HumanDefault,
    HumanConjunctive,
    MathDefinition,
}

/// Per-turn instruction appended after the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    #[default]
    Default,
    React,
    Reflexion,
    Cot,
}

macro_rules! snake_case_names {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$(<$ty>::$variant),*];

            pub fn as_str(&self) -> &'static str {
                match self { $(<$ty>::$variant => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let key = s.trim().to_ascii_lowercase().replace('-', "_");
                match key.as_str() {
                    $($name => Ok(<$ty>::$variant),)*
                    _ => Err(format!("unknown {}: {s:?}", stringify!($ty))),
                }
            }
        }
    };
}

snake_case_names!(SystemVariant {
    HumanDefault => "human_default",
    HumanConjunctive => "human_conjunctive",
    MathDefinition => "math_definition",
});

snake_case_names!(PromptStyle {
    Default => "default",
    React => "react",
    Reflexion => "reflexion",
    Cot => "cot",
});

/// Full system message for `variant` with the step budget filled in.
pub fn system_message(variant: SystemVariant, horizon: usize) -> String {
    let prefix = variant.as_str();
    let template = shipped_template("system_frame").unwrap();
    let bindings = HashMap::from([
        (
            "INITIAL_MESSAGE",
            shipped_body(&format!("{prefix}_initial")).to_string(),
        ),
        ("TIPS", shipped_body(&format!("{prefix}_tips")).to_string()),
        ("HORIZON", horizon.to_string()),
    ]);
    instantiate_prompt(&template, &bindings).expect("system frame bindings are complete")
}

/// Instruction asking for the next command.
pub fn turn_prompt(style: PromptStyle) -> &'static str {
    shipped_body(&format!("style_{}", style.as_str()))
}

/// Instruction asking for a `> True/False` answer in the same style.
pub fn qa_instruction(style: PromptStyle) -> String {
    turn_prompt(style)
        .replace("'> command'", "'> True/False'")
        .replace("command", "answer")
}

/// Exploration-phase user message: the transcript, then the turn prompt.
pub fn exploration_prompt(transcript: &str, style: PromptStyle) -> String {
    format!("{}\n\n{}", transcript.trim_end(), turn_prompt(style))
}

/// Q&A user message for one object, in the layout of the exploration
/// transcript followed by a single question.
pub fn question_prompt(transcript: &str, object_label: &str, style: PromptStyle) -> String {
    format!(
        "{transcript}\nBased on the information you have gathered, answer the following question: Is object {object_label} a blicket?\n\n{}",
        qa_instruction(style)
    )
}
