//! The line-oriented output grammar agents must follow:
//!
//! ```text
//! REASONING: <text>      (chain-of-thought agents only)
//! ACTION: <act label>
//! UTTERANCE: <text>
//! ```
//!
//! Keys are matched case-insensitively and may carry markdown decoration
//! (`**ACTION:**`). A value continues onto following lines until the next key.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::act::DialogueAct;
use super::extract::extract_price;
use crate::corpus::Role;
use crate::price::Price;

/// One agent message within a negotiation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based position in the run.
    pub index: u32,
    pub speaker: Role,
    pub act: DialogueAct,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<Price>,
}

impl Turn {
    /// Renders the turn in the canonical grammar.
    pub fn to_wire(&self) -> String {
        let mut out = String::new();
        if let Some(reasoning) = &self.reasoning {
            let _ = writeln!(out, "REASONING: {reasoning}");
        }
        let _ = write!(out, "ACTION: {}\nUTTERANCE: {}", self.act.label(), self.utterance);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("agent produced an empty response")]
    Empty,
}

/// Format instructions appended to every agent prompt.
pub fn render_output_format(cot: bool) -> String {
    let mut acts = String::new();
    for (i, act) in DialogueAct::ALL.iter().enumerate() {
        if i > 0 {
            acts.push_str(", ");
        }
        acts.push_str(act.label());
    }
    let mut out = String::from("Respond using exactly these lines and nothing else:\n");
    if cot {
        out.push_str("REASONING: <your private step-by-step reasoning about your next move; never shown to the other party>\n");
    }
    let _ = write!(
        out,
        "ACTION: <exactly one of: {acts}>\nUTTERANCE: <the single message you say to the other party>"
    );
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Reasoning,
    Action,
    Utterance,
}

/// Recognizes `KEY:` at the start of a line, returning the key and the value
/// remainder of the line.
fn split_key(line: &str) -> Option<(Key, &str)> {
    let body = line.trim_start_matches(['*', '#', '>', '-', ' ', '\t']);
    let decorated = line.len() != body.len() && line.trim_start().starts_with('*');
    let (key, rest) = [
        (Key::Reasoning, "reasoning"),
        (Key::Action, "action"),
        (Key::Utterance, "utterance"),
    ]
    .into_iter()
    .find_map(|(key, name)| {
        let head = body.get(..name.len())?;
        head.eq_ignore_ascii_case(name).then(|| (key, &body[name.len()..]))
    })?;
    let rest = rest.trim_start_matches('*').trim_start_matches(' ');
    let value = rest.strip_prefix(':')?;
    let value = if decorated { value.trim_start_matches('*') } else { value };
    Some((key, value))
}

/// Parses raw model output into a [`Turn`].
///
/// Total on non-empty input: a missing `ACTION` line yields
/// [`DialogueAct::Unknown`] with the whole response as the utterance, and an
/// unrecognized act label yields `Unknown` with the declared utterance.
/// Reasoning is kept only when `cot` is set.
pub fn parse_turn(raw: &str, speaker: Role, cot: bool, index: u32) -> Result<Turn, ParseError> {
    let whole = raw.trim();
    if whole.is_empty() {
        return Err(ParseError::Empty);
    }

    let mut fields: [Option<Vec<&str>>; 3] = [None, None, None];
    let slot = |k: Key| match k {
        Key::Reasoning => 0,
        Key::Action => 1,
        Key::Utterance => 2,
    };
    let mut current: Option<usize> = None;
    for line in whole.lines() {
        match split_key(line) {
            Some((key, value)) => {
                let i = slot(key);
                if fields[i].is_none() {
                    fields[i] = Some(alloc::vec![value]);
                    current = Some(i);
                } else {
                    // Repeated key: ignore the second block.
                    current = None;
                }
            }
            None => {
                if let Some(lines) = current.and_then(|i| fields[i].as_mut()) {
                    lines.push(line);
                }
            }
        }
    }
    let join = |lines: &Option<Vec<&str>>| lines.as_ref().map(|l| l.join("\n").trim().to_string());

    let action = join(&fields[1]);
    let act = action.as_deref().map_or(DialogueAct::Unknown, DialogueAct::from_label);
    let utterance = match (&action, join(&fields[2])) {
        (Some(_), Some(u)) if !u.is_empty() => u,
        _ => whole.to_string(),
    };
    let reasoning = if cot {
        join(&fields[0]).filter(|r| !r.is_empty())
    } else {
        None
    };
    let price = extract_price(&utterance);
    Ok(Turn {
        index,
        speaker,
        act,
        utterance,
        reasoning,
        price,
    })
}
