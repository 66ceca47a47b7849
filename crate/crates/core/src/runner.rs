//! One buyer/seller negotiation as a turn-limited state machine.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, TurnRequest};
use crate::corpus::{build_knowledge_bases, Role, Scenario};
use crate::price::Price;
use crate::prompting::{build_prompt, AgentProfile, HistoryEntry, PromptConfig, PromptError};
use crate::protocol::{parse_turn, DialogueAct, Turn};
use crate::DEFAULT_MAX_TURNS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accepted,
    Rejected,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Accepted => "accepted",
            Outcome::Rejected => "rejected",
        }
    }
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    /// Turn whose generation failed.
    pub turn: u32,
    pub kind: String,
    pub message: String,
}

/// A completed negotiation.
///
/// `outcome` is `Accepted` exactly when the last turn is an accept and an
/// agreed price could be resolved; `agreed_price` is set in that case only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationRun {
    pub scenario: Scenario,
    pub buyer: AgentProfile,
    pub seller: AgentProfile,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub agreed_price: Option<Price>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunFailure>,
    /// Set when an accept could not be resolved to a price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl NegotiationRun {
    pub fn dialogue_length(&self) -> usize {
        self.turns.len()
    }

    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub max_turns: u32,
    pub prompts: PromptConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_turns: DEFAULT_MAX_TURNS,
            prompts: PromptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("{slot} profile has role {found}")]
    WrongRole { slot: Role, found: Role },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("final turn is not an accept")]
    NotAccepted,
    #[error("no price was mentioned anywhere in the run")]
    NoPrice,
}

/// Price an accept refers to: the one in the accepting utterance, else the
/// most recent price mentioned earlier in the run.
pub fn resolve_agreed_price(turns: &[Turn]) -> Result<Price, ResolveError> {
    let last = turns.last().ok_or(ResolveError::NotAccepted)?;
    if last.act != DialogueAct::Accept {
        return Err(ResolveError::NotAccepted);
    }
    turns
        .iter()
        .rev()
        .find_map(|t| t.price)
        .ok_or(ResolveError::NoPrice)
}

/// Runs one negotiation. The buyer speaks first and speakers alternate; the
/// run ends on the first accept or after `max_turns` messages. Each agent
/// sees only prior utterances, its own knowledge base and the turns left.
///
/// Backend failures end the run as rejected with the failure recorded and
/// completed turns kept.
pub fn run_negotiation(
    scenario: &Scenario,
    buyer: (&AgentProfile, &mut dyn Agent),
    seller: (&AgentProfile, &mut dyn Agent),
    config: &RunConfig,
) -> Result<NegotiationRun, RunError> {
    let (buyer_profile, buyer_agent) = buyer;
    let (seller_profile, seller_agent) = seller;
    for (slot, profile) in [(Role::Buyer, buyer_profile), (Role::Seller, seller_profile)] {
        if profile.role != slot {
            return Err(RunError::WrongRole {
                slot,
                found: profile.role,
            });
        }
    }
    let (buyer_kb, seller_kb) = build_knowledge_bases(scenario);

    let mut turns: Vec<Turn> = Vec::new();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut failure = None;

    for index in 1..=config.max_turns {
        let speaker = if index % 2 == 1 { Role::Buyer } else { Role::Seller };
        let (profile, kb, agent): (_, _, &mut dyn Agent) = match speaker {
            Role::Buyer => (buyer_profile, &buyer_kb, &mut *buyer_agent),
            Role::Seller => (seller_profile, &seller_kb, &mut *seller_agent),
        };
        let turns_remaining = config.max_turns - (index - 1);
        let prompt = build_prompt(&config.prompts, profile, kb, &history, turns_remaining)?;
        let request = TurnRequest {
            index,
            profile,
            kb,
            prompt: &prompt,
        };
        let raw = match agent.respond(&request) {
            Ok(raw) => raw,
            Err(err) => {
                failure = Some(RunFailure {
                    turn: index,
                    kind: err.kind().to_string(),
                    message: err.to_string(),
                });
                break;
            }
        };
        let turn = match parse_turn(&raw, speaker, profile.cot, index) {
            Ok(turn) => turn,
            Err(err) => {
                failure = Some(RunFailure {
                    turn: index,
                    kind: "empty_response".into(),
                    message: err.to_string(),
                });
                break;
            }
        };
        history.push(HistoryEntry {
            speaker,
            utterance: turn.utterance.clone(),
        });
        let accepted = turn.act == DialogueAct::Accept;
        turns.push(turn);
        if accepted {
            break;
        }
    }

    let (outcome, agreed_price, diagnostic) = match resolve_agreed_price(&turns) {
        Ok(price) => (Outcome::Accepted, Some(price), None),
        Err(ResolveError::NoPrice) => (
            Outcome::Rejected,
            None,
            Some("accept without any price in the run; downgraded to rejected".to_string()),
        ),
        Err(ResolveError::NotAccepted) => (Outcome::Rejected, None, None),
    };

    Ok(NegotiationRun {
        scenario: scenario.clone(),
        buyer: buyer_profile.clone(),
        seller: seller_profile.clone(),
        turns,
        outcome,
        agreed_price,
        failure,
        diagnostic,
    })
}
