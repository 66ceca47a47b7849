//! Price mentions in free-text utterances.
//!
//! Two passes: the first `$`-marked amount wins outright. Failing that, the
//! first bare number preceded by a price-context word (`do`, `offer`, `pay`,
//! `price`, `go`, `meet`, with at most two filler words such as `you at` in
//! between) is taken. Bare numbers elsewhere are treated as quantities.

use alloc::string::String;
use alloc::vec::Vec;

use crate::price::Price;

const CONTEXT_WORDS: &[&str] = &[
    "do", "offer", "offers", "offered", "offering", "pay", "paying", "price", "priced", "go", "meet",
];

const FILLER_WORDS: &[&str] = &["at", "for", "of", "to", "you", "around", "about", "me", "it", "is", "be"];

const MAX_FILLERS: usize = 2;

/// First price mentioned in `utterance`, rounded to cents.
pub fn extract_price(utterance: &str) -> Option<Price> {
    currency_marked(utterance).or_else(|| context_marked(utterance))
}

fn currency_marked(text: &str) -> Option<Price> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    while let Some(offset) = text[pos..].find('$') {
        let mut start = pos + offset + 1;
        while start < bytes.len() && bytes[start] == b' ' {
            start += 1;
        }
        if let Some(end) = number_end(bytes, start) {
            if let Ok(price) = text[start..end].parse::<Price>() {
                return Some(price);
            }
        }
        pos = pos + offset + 1;
    }
    None
}

/// End of a numeric literal starting at `start`: digits, `,ddd` groups and
/// an optional fractional part. `None` if no digit is at `start`.
fn number_end(bytes: &[u8], start: usize) -> Option<usize> {
    let digit = |i: usize| bytes.get(i).is_some_and(u8::is_ascii_digit);
    if !digit(start) {
        return None;
    }
    let mut end = start;
    while digit(end) {
        end += 1;
    }
    while bytes.get(end) == Some(&b',')
        && digit(end + 1)
        && digit(end + 2)
        && digit(end + 3)
        && !digit(end + 4)
    {
        end += 4;
    }
    if bytes.get(end) == Some(&b'.') && digit(end + 1) {
        end += 1;
        while digit(end) {
            end += 1;
        }
    }
    Some(end)
}

enum Token {
    Word(String),
    Number(Option<Price>),
    Break,
}

fn tokenize(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_digit() {
            let end = number_end(bytes, i).unwrap_or(i + 1);
            let glued = text[end..].chars().next().is_some_and(char::is_alphanumeric);
            if glued {
                // "3B", "7pm": part of a word, not an amount.
                let word_end = word_end(text, end);
                tokens.push(Token::Word(text[i..word_end].to_lowercase()));
                i = word_end;
            } else {
                tokens.push(Token::Number(text[i..end].parse().ok()));
                i = end;
            }
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if matches!(c, b'.' | b',' | b';' | b':' | b'!' | b'?' | b'(' | b')' | b'\n') {
            tokens.push(Token::Break);
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(' ');
            if ch.is_alphabetic() || ch == '\'' {
                let end = word_end(text, i);
                tokens.push(Token::Word(text[i..end].to_lowercase()));
                i = end;
            } else {
                i += ch.len_utf8();
            }
        }
    }
    tokens
}

fn word_end(text: &str, start: usize) -> usize {
    text[start..]
        .char_indices()
        .find(|&(_, c)| !(c.is_alphanumeric() || c == '\''))
        .map_or(text.len(), |(off, _)| start + off)
}

fn context_marked(text: &str) -> Option<Price> {
    let tokens = tokenize(text);
    for (i, token) in tokens.iter().enumerate() {
        let Token::Number(Some(price)) = token else {
            continue;
        };
        let mut fillers = 0;
        for prev in tokens[..i].iter().rev() {
            match prev {
                Token::Word(w) if CONTEXT_WORDS.contains(&w.as_str()) => return Some(*price),
                Token::Word(w) if FILLER_WORDS.contains(&w.as_str()) && fillers < MAX_FILLERS => {
                    fillers += 1;
                }
                _ => break,
            }
        }
    }
    None
}
