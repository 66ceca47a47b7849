//! Dialogue acts, the agent output grammar and price extraction.

mod act;
mod extract;
mod grammar;

pub use act::DialogueAct;
pub use extract::extract_price;
pub use grammar::{parse_turn, render_output_format, ParseError, Turn};

#[cfg(test)]
mod props {
    use alloc::format;
    use alloc::string::String;

    use proptest::prelude::*;

    use super::*;
    use crate::corpus::Role;

    fn act() -> impl Strategy<Value = DialogueAct> {
        proptest::sample::select(DialogueAct::ALL.to_vec())
    }

    fn single_line() -> impl Strategy<Value = String> {
        "[^\r\n]{1,80}"
            .prop_map(|s| String::from(s.trim()))
            .prop_filter("non-empty", |s| !s.is_empty())
    }

    proptest! {
        #[test]
        fn grammar_round_trip(act in act(), utterance in single_line(), reasoning in proptest::option::of(single_line())) {
            let turn = Turn {
                index: 1,
                speaker: Role::Buyer,
                act,
                utterance: utterance.clone(),
                reasoning: reasoning.clone(),
                price: extract_price(&utterance),
            };
            let parsed = parse_turn(&turn.to_wire(), Role::Buyer, true, 1).unwrap();
            prop_assert_eq!(parsed.act, act);
            prop_assert_eq!(parsed.utterance, utterance);
            prop_assert_eq!(parsed.reasoning, reasoning);
        }

        #[test]
        fn parse_is_total(raw in "\\PC*", cot: bool) {
            match parse_turn(&raw, Role::Seller, cot, 3) {
                Ok(turn) => {
                    prop_assert!(!turn.utterance.is_empty());
                    prop_assert!(cot || turn.reasoning.is_none());
                }
                Err(ParseError::Empty) => prop_assert!(raw.trim().is_empty()),
            }
        }

        #[test]
        fn prepending_plain_text_keeps_price(prefix in "[a-zA-Z ,'!?]{0,40}", utterance in "[ -~]{0,60}") {
            let shifted = format!("{prefix}. {utterance}");
            prop_assert_eq!(extract_price(&shifted), extract_price(&utterance));
        }
    }
}
