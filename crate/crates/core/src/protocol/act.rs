use core::fmt;

use serde::{Deserialize, Serialize};

/// Coarse dialogue acts an agent declares alongside each utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueAct {
    Intro,
    InitPrice,
    Offer,
    CounterPrice,
    Insist,
    Agree,
    Disagree,
    Accept,
    Inform,
    Inquire,
    Unknown,
}

impl DialogueAct {
    pub const ALL: [DialogueAct; 11] = [
        DialogueAct::Intro,
        DialogueAct::InitPrice,
        DialogueAct::Offer,
        DialogueAct::CounterPrice,
        DialogueAct::Insist,
        DialogueAct::Agree,
        DialogueAct::Disagree,
        DialogueAct::Accept,
        DialogueAct::Inform,
        DialogueAct::Inquire,
        DialogueAct::Unknown,
    ];

    /// Label used on the wire (`init-price`, `counter-price`, ...).
    pub fn label(self) -> &'static str {
        match self {
            DialogueAct::Intro => "intro",
            DialogueAct::InitPrice => "init-price",
            DialogueAct::Offer => "offer",
            DialogueAct::CounterPrice => "counter-price",
            DialogueAct::Insist => "insist",
            DialogueAct::Agree => "agree",
            DialogueAct::Disagree => "disagree",
            DialogueAct::Accept => "accept",
            DialogueAct::Inform => "inform",
            DialogueAct::Inquire => "inquire",
            DialogueAct::Unknown => "unknown",
        }
    }

    /// Maps a declared label onto the act set. Case, `_`/`-`/space
    /// separators, surrounding quotes and trailing punctuation are ignored;
    /// anything else becomes [`DialogueAct::Unknown`].
    pub fn from_label(raw: &str) -> DialogueAct {
        let cleaned = raw.trim().trim_matches(|c: char| {
            matches!(c, '"' | '\'' | '`' | '*' | '[' | ']' | '<' | '>' | '.' | ',' | ';' | '!')
        });
        if let Some(act) = match_label(cleaned) {
            return act;
        }
        cleaned
            .split_whitespace()
            .next()
            .and_then(match_label)
            .unwrap_or(DialogueAct::Unknown)
    }
}

fn match_label(candidate: &str) -> Option<DialogueAct> {
    let mut buf = [0u8; 16];
    let mut len = 0;
    for c in candidate.trim().chars() {
        if len == buf.len() || !c.is_ascii() {
            return None;
        }
        buf[len] = match c {
            '_' | ' ' => b'-',
            c => c.to_ascii_lowercase() as u8,
        };
        len += 1;
    }
    let norm = core::str::from_utf8(&buf[..len]).ok()?;
    DialogueAct::ALL.into_iter().find(|a| a.label() == norm)
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for act in DialogueAct::ALL {
            assert_eq!(DialogueAct::from_label(act.label()), act);
        }
    }

    #[test]
    fn tolerant_matching() {
        assert_eq!(DialogueAct::from_label("Counter_Price"), DialogueAct::CounterPrice);
        assert_eq!(DialogueAct::from_label(" INIT PRICE "), DialogueAct::InitPrice);
        assert_eq!(DialogueAct::from_label("`accept`."), DialogueAct::Accept);
        assert_eq!(DialogueAct::from_label("offer (final)"), DialogueAct::Offer);
        assert_eq!(DialogueAct::from_label("haggle"), DialogueAct::Unknown);
        assert_eq!(DialogueAct::from_label(""), DialogueAct::Unknown);
    }
}
