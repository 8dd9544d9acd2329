//! Text-based Blicket Test: environment, hypothesis tracking, agents, chat
//! backends, trial harness and analysis.

pub mod agents;
pub mod analysis;
pub mod backend;
pub mod dsl;
pub mod env;
pub mod harness;
pub mod hypothesis;
pub mod prompts;
