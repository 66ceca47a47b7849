//! The agent interface and deterministic scripted policies.
//!
//! Remote model backends implement [`Agent`] in `parley-harness`; the
//! scripted policies here make runs reproducible without a model server.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{KnowledgeBase, Role};
use crate::price::Price;
use crate::prompting::{AgentProfile, PromptBundle};
use crate::protocol::{extract_price, DialogueAct};

/// Everything an agent is given for one turn.
#[derive(Clone, Copy, Debug)]
pub struct TurnRequest<'a> {
    pub index: u32,
    pub profile: &'a AgentProfile,
    pub kb: &'a KnowledgeBase,
    pub prompt: &'a PromptBundle,
}

/// Backend failures, kept distinct so transcripts can attribute them.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentError {
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("HTTP status {status} after {attempts} attempt(s)")]
    Status { status: u16, attempts: u32 },
    #[error("malformed response: {detail}")]
    MalformedResponse { detail: String },
    #[error("transport error after {attempts} attempt(s): {detail}")]
    Transport { detail: String, attempts: u32 },
}

impl AgentError {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentError::Timeout { .. } => "timeout",
            AgentError::Status { .. } => "status",
            AgentError::MalformedResponse { .. } => "malformed_response",
            AgentError::Transport { .. } => "transport",
        }
    }
}

/// Produces one raw response per turn, in the agent output grammar.
pub trait Agent {
    fn respond(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError>;
}

impl<A: Agent + ?Sized> Agent for &mut A {
    fn respond(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError> {
        (**self).respond(request)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    LinearConcession,
    Stubborn,
    AcceptBot,
}

/// Parameters of a scripted agent. Fractions are of the listing price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    pub kind: PolicyKind,
    #[serde(default = "default_opening")]
    pub opening_fraction: f64,
    #[serde(default = "default_step")]
    pub step_fraction: f64,
    #[serde(default = "default_threshold")]
    pub accept_threshold: f64,
}

fn default_opening() -> f64 {
    0.5
}
fn default_step() -> f64 {
    0.1
}
fn default_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} must be in (0, 1], got {value}")]
pub struct PolicyError {
    pub field: &'static str,
    pub value: f64,
}

impl ScriptedPolicy {
    pub fn new(kind: PolicyKind, opening_fraction: f64, step_fraction: f64, accept_threshold: f64) -> Self {
        ScriptedPolicy {
            kind,
            opening_fraction,
            step_fraction,
            accept_threshold,
        }
    }

    /// `kind` with opening 0.5, step 0.1 and threshold 0.05.
    pub fn with_defaults(kind: PolicyKind) -> Self {
        ScriptedPolicy::new(kind, default_opening(), default_step(), default_threshold())
    }

    pub fn accept_bot() -> Self {
        ScriptedPolicy::with_defaults(PolicyKind::AcceptBot)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let checks: &[(&'static str, f64)] = match self.kind {
            PolicyKind::LinearConcession => &[
                ("opening_fraction", self.opening_fraction),
                ("step_fraction", self.step_fraction),
                ("accept_threshold", self.accept_threshold),
            ],
            PolicyKind::Stubborn => &[("opening_fraction", self.opening_fraction)],
            PolicyKind::AcceptBot => &[],
        };
        for &(field, value) in checks {
            if !(value > 0.0 && value <= 1.0) {
                return Err(PolicyError { field, value });
            }
        }
        Ok(())
    }
}

/// What a scripted agent derives from the conversation so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PolicyState {
    /// Turns this agent has already taken.
    pub own_turns: u32,
    /// Most recent price the counterpart mentioned, if any.
    pub counterpart_price: Option<Price>,
}

impl PolicyState {
    pub fn from_prompt(prompt: &PromptBundle) -> PolicyState {
        let own_turns = prompt.history.iter().filter(|h| h.speaker == prompt.role).count() as u32;
        let counterpart_price = prompt
            .history
            .iter()
            .rev()
            .filter(|h| h.speaker != prompt.role)
            .find_map(|h| extract_price(&h.utterance));
        PolicyState {
            own_turns,
            counterpart_price,
        }
    }
}

/// Price a linear-concession agent stands at on its `k`-th turn (0-based).
///
/// The buyer opens at `min(opening * listing, target)` and rises by
/// `step * listing` per turn up to its target; the seller mirrors this from
/// above. The target is the agent's concession limit.
pub fn linear_price(policy: &ScriptedPolicy, kb: &KnowledgeBase, k: u32) -> Price {
    let listing = kb.listing_price;
    let step = listing.scale(policy.step_fraction).cents().saturating_mul(i64::from(k));
    let opening = listing.scale(policy.opening_fraction);
    match kb.role {
        Role::Buyer => {
            let open = opening.min(kb.target_price);
            Price::from_cents(open.cents().saturating_add(step)).min(kb.target_price)
        }
        Role::Seller => {
            let open = opening.max(kb.target_price);
            Price::from_cents(open.cents().saturating_sub(step)).max(kb.target_price)
        }
    }
}

fn acceptable(role: Role, own: Price, offered: Price, threshold: Price) -> bool {
    match role {
        Role::Buyer => offered <= own + threshold,
        Role::Seller => offered + threshold >= own,
    }
}

/// One scripted turn in the canonical grammar.
pub fn scripted_turn(policy: &ScriptedPolicy, kb: &KnowledgeBase, state: PolicyState, cot: bool) -> String {
    let (act, utterance, note) = match policy.kind {
        PolicyKind::AcceptBot => match state.counterpart_price {
            Some(p) => (DialogueAct::Accept, format!("Deal, ${p} works for me."), format!("any priced proposal is accepted; accepting ${p}")),
            None => (
                DialogueAct::Inquire,
                String::from("What price did you have in mind?"),
                String::from("no proposal yet"),
            ),
        },
        PolicyKind::Stubborn => {
            let p = kb.listing_price.scale(policy.opening_fraction);
            if state.own_turns == 0 {
                (DialogueAct::InitPrice, opening_line(kb.role, p), format!("holding at ${p}"))
            } else {
                (DialogueAct::Insist, format!("${p}, take it or leave it."), format!("holding at ${p}"))
            }
        }
        PolicyKind::LinearConcession => {
            let own = linear_price(policy, kb, state.own_turns);
            let threshold = kb.listing_price.scale(policy.accept_threshold);
            match state.counterpart_price {
                Some(offered) if acceptable(kb.role, own, offered, threshold) => (
                    DialogueAct::Accept,
                    format!("Deal at ${offered}."),
                    format!("${offered} is within ${threshold} of my ${own}"),
                ),
                _ if state.own_turns == 0 => (
                    DialogueAct::InitPrice,
                    opening_line(kb.role, own),
                    format!("opening at ${own}"),
                ),
                _ if own == linear_price(policy, kb, state.own_turns - 1) => (
                    DialogueAct::Insist,
                    format!("${own} is as far as I can go."),
                    format!("at my limit ${own}"),
                ),
                _ => (
                    DialogueAct::CounterPrice,
                    format!("How about ${own}?"),
                    format!("conceding to ${own}"),
                ),
            }
        }
    };
    let mut out = String::new();
    if cot {
        let _ = writeln!(out, "REASONING: {note}");
    }
    let _ = write!(out, "ACTION: {}\nUTTERANCE: {utterance}", act.label());
    out
}

fn opening_line(role: Role, price: Price) -> String {
    match role {
        Role::Buyer => format!("Hi, would you take ${price} for it?"),
        Role::Seller => format!("I'm asking ${price} for it."),
    }
}

/// An [`Agent`] driven by a [`ScriptedPolicy`]. Stateless: every response is
/// derived from the request alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedAgent {
    pub policy: ScriptedPolicy,
}

impl ScriptedAgent {
    pub fn new(policy: ScriptedPolicy) -> Self {
        ScriptedAgent { policy }
    }
}

impl Agent for ScriptedAgent {
    fn respond(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError> {
        let state = PolicyState::from_prompt(request.prompt);
        Ok(scripted_turn(&self.policy, request.kb, state, request.profile.cot))
    }
}
