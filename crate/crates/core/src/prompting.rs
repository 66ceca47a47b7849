//! Agent profiles and prompt assembly.
//!
//! The system prompt is rendered from a [`PromptConfig`], whose templates use
//! `{name}` placeholders (`{{` and `}}` for literal braces). Placeholders
//! available in [`PromptConfig::system_template`]:
//!
//! | placeholder            | value                                              |
//! |------------------------|----------------------------------------------------|
//! | `{role}`               | `buyer` or `seller`                                |
//! | `{title}`              | listing title                                      |
//! | `{description}`        | listing description                                |
//! | `{category}`           | listing category                                   |
//! | `{listing_price}`      | listing price, e.g. `120.00`                       |
//! | `{target_price}`       | the agent's own target price                       |
//! | `{goal}`               | [`PromptConfig::goal`]                             |
//! | `{personality}`        | the personality paragraph, empty for `none`        |
//! | `{cot}`                | [`PromptConfig::cot_directive`] when CoT is on     |
//! | `{turns_remaining}`    | turns left for both parties combined               |
//! | `{final_turn_warning}` | [`PromptConfig::final_turn_warning`] on the last turn |
//! | `{format}`             | output grammar instructions                        |

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{KnowledgeBase, Role};
use crate::protocol::render_output_format;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Personality {
    Aggressive,
    Fair,
    Passive,
    #[default]
    None,
}

impl Personality {
    pub fn as_str(self) -> &'static str {
        match self {
            Personality::Aggressive => "aggressive",
            Personality::Fair => "fair",
            Personality::Passive => "passive",
            Personality::None => "none",
        }
    }
}

impl fmt::Display for Personality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How one side of a negotiation is configured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    /// Human-readable label, unique within a sweep.
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub personality: Personality,
    #[serde(default)]
    pub cot: bool,
    /// Identifier of the backend that produces this agent's turns.
    pub model_ref: String,
}

/// Prompt text templates. The defaults are our own wording.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub version: String,
    pub system_template: String,
    pub goal: String,
    pub aggressive: String,
    pub fair: String,
    pub passive: String,
    pub cot_directive: String,
    pub final_turn_warning: String,
    /// First user message when the agent speaks before any history exists.
    pub opening_message: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            version: "reconstruction-1".into(),
            system_template: "You are the {role} in a negotiation over a marketplace listing.\n\
                Listing title: {title}\n\
                Category: {category}\n\
                Description: {description}\n\
                Listing price: ${listing_price}\n\
                Your target price: ${target_price}\n\
                \n\
                {goal}\n\
                \n\
                {personality}\n\
                \n\
                {cot}\n\
                \n\
                Turns remaining in this negotiation (both parties combined): {turns_remaining}.\n\
                {final_turn_warning}\n\
                \n\
                {format}"
                .into(),
            goal: "Negotiate the best price you can for yourself. Try to reach an agreement: \
                accept reasonable offers that are close to your target price. Never reveal your \
                target price. Only use the accept action to agree to a specific price the other \
                party has proposed."
                .into(),
            aggressive: "You are an aggressive negotiator. Anchor firmly on a price that strongly \
                favors you, concede as little and as rarely as possible, and push back hard on \
                the other party's offers."
                .into(),
            fair: "You are a fair negotiator. Aim for an outcome that is reasonable for both \
                sides, justify your offers, and match the other party's concessions."
                .into(),
            passive: "You are a passive negotiator. Be accommodating and polite, share \
                information about your needs freely, and prefer reaching an agreement over \
                holding out for a better price."
                .into(),
            cot_directive: "Before choosing your action, think step by step about the \
                conversation so far, your target price and the best next move, and write that \
                reasoning on the REASONING line."
                .into(),
            final_turn_warning: "This is the final turn. If no agreement is reached now, the \
                negotiation ends without a deal."
                .into(),
            opening_message: "The negotiation is starting. You speak first.".into(),
        }
    }
}

const PLACEHOLDERS: &[&str] = &[
    "role",
    "title",
    "description",
    "category",
    "listing_price",
    "target_price",
    "goal",
    "personality",
    "cot",
    "turns_remaining",
    "final_turn_warning",
    "format",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("profile role {profile} does not match knowledge base role {kb}")]
    RoleMismatch { profile: Role, kb: Role },
    #[error("unknown placeholder `{{{0}}}` in template")]
    UnknownPlaceholder(String),
    #[error("unbalanced brace at byte {0} in template")]
    UnbalancedBrace(usize),
}

impl PromptConfig {
    pub fn personality_text(&self, personality: Personality) -> &str {
        match personality {
            Personality::Aggressive => &self.aggressive,
            Personality::Fair => &self.fair,
            Personality::Passive => &self.passive,
            Personality::None => "",
        }
    }

    /// Checks the system template for unknown placeholders or stray braces.
    pub fn validate(&self) -> Result<(), PromptError> {
        render_template(&self.system_template, |_| Some(String::new())).map(|_| ())
    }
}

/// Personality paragraph from the default configuration.
pub fn personality_text(personality: Personality) -> String {
    PromptConfig::default().personality_text(personality).to_string()
}

/// One prior utterance as the agent sees it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker: Role,
    pub utterance: String,
}

/// Everything sent to a backend for one turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: Role,
    pub system: String,
    pub history: Vec<HistoryEntry>,
    pub turns_remaining: u32,
    pub opening_message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl PromptBundle {
    /// Chat-completion message list: the system prompt, then the history
    /// with the agent's own utterances as `assistant` and the counterpart's
    /// as `user`. A leading opening message keeps the first non-system
    /// message a `user` message.
    pub fn chat_messages(&self) -> Vec<ChatMessage> {
        let mut messages = Vec::with_capacity(self.history.len() + 2);
        messages.push(ChatMessage {
            role: ChatRole::System,
            content: self.system.clone(),
        });
        if self.history.first().is_none_or(|h| h.speaker == self.role) {
            messages.push(ChatMessage {
                role: ChatRole::User,
                content: self.opening_message.clone(),
            });
        }
        for entry in &self.history {
            let role = if entry.speaker == self.role {
                ChatRole::Assistant
            } else {
                ChatRole::User
            };
            messages.push(ChatMessage {
                role,
                content: entry.utterance.clone(),
            });
        }
        messages
    }
}

/// Renders the prompt for one turn. Pure: equal inputs give equal output.
pub fn build_prompt(
    config: &PromptConfig,
    profile: &AgentProfile,
    kb: &KnowledgeBase,
    history: &[HistoryEntry],
    turns_remaining: u32,
) -> Result<PromptBundle, PromptError> {
    if profile.role != kb.role {
        return Err(PromptError::RoleMismatch {
            profile: profile.role,
            kb: kb.role,
        });
    }
    let system = render_template(&config.system_template, |name| {
        Some(match name {
            "role" => kb.role.as_str().to_string(),
            "title" => kb.title.clone(),
            "description" => kb.description.clone(),
            "category" => kb.category.clone(),
            "listing_price" => kb.listing_price.to_string(),
            "target_price" => kb.target_price.to_string(),
            "goal" => config.goal.clone(),
            "personality" => config.personality_text(profile.personality).to_string(),
            "cot" if profile.cot => config.cot_directive.clone(),
            "cot" => String::new(),
            "turns_remaining" => turns_remaining.to_string(),
            "final_turn_warning" if turns_remaining <= 1 => config.final_turn_warning.clone(),
            "final_turn_warning" => String::new(),
            "format" => render_output_format(profile.cot),
            _ => return None,
        })
    })?;
    Ok(PromptBundle {
        role: profile.role,
        system: collapse_blank_lines(&system),
        history: history.to_vec(),
        turns_remaining,
        opening_message: config.opening_message.clone(),
    })
}

/// Substitutes `{name}` placeholders. `lookup` returning `None` or a name
/// outside the known set is an error.
pub fn render_template(
    template: &str,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    let mut offset = 0;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let consumed = if tail.starts_with("{{") {
            out.push('{');
            2
        } else if tail.starts_with("}}") {
            out.push('}');
            2
        } else if tail.starts_with('}') {
            return Err(PromptError::UnbalancedBrace(offset + pos));
        } else {
            let close = tail.find('}').ok_or(PromptError::UnbalancedBrace(offset + pos))?;
            let name = &tail[1..close];
            if !PLACEHOLDERS.contains(&name) {
                return Err(PromptError::UnknownPlaceholder(name.to_string()));
            }
            let value = lookup(name).ok_or_else(|| PromptError::UnknownPlaceholder(name.to_string()))?;
            out.push_str(&value);
            close + 1
        };
        rest = &tail[consumed..];
        offset += pos + consumed;
    }
    out.push_str(rest);
    Ok(out)
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.trim().lines() {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    out.truncate(out.trim_end().len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_knowledge_bases, Scenario};
    use crate::price::Price;

    fn scenario() -> Scenario {
        Scenario {
            id: "s1".into(),
            title: "Verizon Car Charger".into(),
            description: "Dual output micro USB with LED light".into(),
            category: "electronics".into(),
            listing_price: Price::dollars(10),
            buyer_target: Price::dollars(5),
            seller_target: Price::from_cents(975),
        }
    }

    fn profile(role: Role, personality: Personality, cot: bool) -> AgentProfile {
        AgentProfile {
            name: "p".into(),
            role,
            personality,
            cot,
            model_ref: "scripted".into(),
        }
    }

    #[test]
    fn buyer_prompt_hides_seller_target() {
        let (kb, _) = build_knowledge_bases(&scenario());
        let cfg = PromptConfig::default();
        let bundle = build_prompt(&cfg, &profile(Role::Buyer, Personality::None, false), &kb, &[], 15).unwrap();
        assert!(bundle.system.contains("Your target price: $5.00"));
        assert!(!bundle.system.contains("9.75"));
        assert!(bundle.system.contains("buyer"));
        assert!(bundle.system.contains("Turns remaining in this negotiation (both parties combined): 15."));
        assert!(!bundle.system.contains(&cfg.final_turn_warning));
        assert!(!bundle.system.contains("REASONING"));
    }

    #[test]
    fn final_turn_warning() {
        let (_, kb) = build_knowledge_bases(&scenario());
        let cfg = PromptConfig::default();
        let bundle = build_prompt(&cfg, &profile(Role::Seller, Personality::None, false), &kb, &[], 1).unwrap();
        assert!(bundle.system.contains(&cfg.final_turn_warning));
    }

    #[test]
    fn personality_and_cot_paragraphs() {
        let (kb, _) = build_knowledge_bases(&scenario());
        let cfg = PromptConfig {
            aggressive: "Custom aggressive paragraph.".into(),
            ..PromptConfig::default()
        };
        let bundle = build_prompt(&cfg, &profile(Role::Buyer, Personality::Aggressive, true), &kb, &[], 9).unwrap();
        assert!(bundle.system.contains("Custom aggressive paragraph."));
        assert!(bundle.system.contains(&cfg.cot_directive));
        assert!(bundle.system.contains("REASONING:"));
    }

    #[test]
    fn personality_lookup() {
        assert!(personality_text(Personality::Aggressive).contains("concede as little"));
        assert!(personality_text(Personality::Passive).contains("share"));
        assert!(personality_text(Personality::Fair).contains("reasonable for both"));
        assert_eq!(personality_text(Personality::None), "");
    }

    #[test]
    fn role_mismatch() {
        let (kb, _) = build_knowledge_bases(&scenario());
        let err = build_prompt(&PromptConfig::default(), &profile(Role::Seller, Personality::None, false), &kb, &[], 3)
            .unwrap_err();
        assert_eq!(err, PromptError::RoleMismatch { profile: Role::Seller, kb: Role::Buyer });
    }

    #[test]
    fn template_errors() {
        assert_eq!(
            render_template("{nope}", |_| Some(String::new())),
            Err(PromptError::UnknownPlaceholder("nope".into()))
        );
        assert_eq!(render_template("a {role", |_| Some(String::new())), Err(PromptError::UnbalancedBrace(2)));
        assert_eq!(render_template("a } b", |_| Some(String::new())), Err(PromptError::UnbalancedBrace(2)));
        assert_eq!(
            render_template("{{literal}} {role}", |_| Some("x".into())).unwrap(),
            "{literal} x"
        );
        assert!(PromptConfig::default().validate().is_ok());
    }

    #[test]
    fn chat_mapping_alternates() {
        let history = alloc::vec![
            HistoryEntry { speaker: Role::Buyer, utterance: "$4?".into() },
            HistoryEntry { speaker: Role::Seller, utterance: "$10.".into() },
        ];
        let (kb, _) = build_knowledge_bases(&scenario());
        let bundle = build_prompt(&PromptConfig::default(), &profile(Role::Buyer, Personality::None, false), &kb, &history, 13)
            .unwrap();
        let roles: Vec<_> = bundle.chat_messages().iter().map(|m| m.role).collect();
        assert_eq!(roles, [ChatRole::System, ChatRole::User, ChatRole::Assistant, ChatRole::User]);

        let (_, kb) = build_knowledge_bases(&scenario());
        let bundle = build_prompt(&PromptConfig::default(), &profile(Role::Seller, Personality::None, false), &kb, &history[..1], 14)
            .unwrap();
        let msgs = bundle.chat_messages();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[1].role, ChatRole::User);
        assert_eq!(msgs[1].content, "$4?");
    }
}
