//! Core of the parley negotiation benchmark.
//!
//! Everything in this crate is pure computation over in-memory values, so it
//! builds without `std`:
//!
//! - [`price`]: exact two-decimal currency amounts
//! - [`corpus`]: scenarios, knowledge bases and deterministic sampling
//! - [`protocol`]: the dialogue-act set, the agent output grammar and price extraction
//! - [`prompting`]: agent profiles and prompt assembly
//! - [`agent`]: the agent interface and the scripted reference policies
//! - [`runner`]: the turn-limited negotiation state machine
//! - [`metrics`]: per-run metrics and aggregation
//!
//! File formats, the HTTP backend, sweeps and reports live in `parley-harness`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent;
pub mod corpus;
pub mod metrics;
pub mod price;
pub mod prompting;
pub mod protocol;
pub mod runner;

pub use agent::{Agent, AgentError, PolicyKind, ScriptedAgent, ScriptedPolicy, TurnRequest};
pub use corpus::{KnowledgeBase, Role, Scenario, ScenarioError};
pub use metrics::{AggregateMetrics, Mean, MetricsError, RunMetrics};
pub use price::Price;
pub use prompting::{AgentProfile, Personality, PromptBundle, PromptConfig};
pub use protocol::{DialogueAct, Turn};
pub use runner::{NegotiationRun, Outcome, RunConfig};

/// Turn cap used by the reference setup. Counts messages from both parties.
pub const DEFAULT_MAX_TURNS: u32 = 15;
