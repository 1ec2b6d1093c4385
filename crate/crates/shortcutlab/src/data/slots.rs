// SPDX-License-Identifier: MIT OR Apache-2.0

//! Capitalization-based name-slot detection for arbitrary review text.
//!
//! The lab generator records name slots exactly, so this heuristic exists
//! for *external* text: it finds token spans that look like person names so
//! the attribution and substitution tooling can run on reviews the
//! generator never produced.
//!
//! Rules, applied to [`split_raw_words`](super::tokenizer::split_raw_words)
//! tokens:
//!
//! * a token is *name-shaped* if it is at least two characters, starts with
//!   an ASCII uppercase letter, and is lowercase after that (`Alice` yes;
//!   `DVD`, `I`, `it's` no);
//! * a maximal run of two or more name-shaped tokens is always a slot;
//! * a lone name-shaped token is a slot only when it is **not** sentence
//!   initial (sentence starts are position 0 and tokens following `.`,
//!   `!`, or `?`, looking through closing quotes).
//!
//! The known miss: a sentence-initial lone surname ("Crane is everywhere
//! ...") is indistinguishable from an ordinary capitalized sentence opener
//! and is deliberately not flagged; the fixture below pins that behavior.

use serde::{Deserialize, Serialize};

use super::tokenizer::split_raw_words;

/// A detected name span over word-token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameSlot {
    /// Index of the first token of the name.
    pub start: usize,
    /// Number of tokens in the name (1 = lone surname/forename).
    pub len: usize,
}

impl NameSlot {
    /// Construct a slot covering `len` tokens from `start`.
    #[must_use]
    pub fn new(start: usize, len: usize) -> Self {
        NameSlot { start, len }
    }

    /// First index past the slot.
    #[must_use]
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

fn is_name_shaped(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    let mut rest = 0;
    for c in chars {
        if !c.is_ascii_lowercase() {
            return false;
        }
        rest += 1;
    }
    rest >= 1
}

fn is_sentence_initial(tokens: &[String], index: usize) -> bool {
    let mut i = index;
    while i > 0 {
        let prev = tokens[i - 1].as_str();
        match prev {
            "\"" | "'" => i -= 1,
            "." | "!" | "?" => return true,
            _ => return false,
        }
    }
    true
}

/// Detect name slots in pre-split word tokens.
#[must_use]
pub fn detect_name_slots_in_tokens(tokens: &[String]) -> Vec<NameSlot> {
    let mut slots = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !is_name_shaped(&tokens[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < tokens.len() && is_name_shaped(&tokens[i]) {
            i += 1;
        }
        let len = i - start;
        if len >= 2 || !is_sentence_initial(tokens, start) {
            slots.push(NameSlot::new(start, len));
        }
    }
    slots
}

/// Tokenize raw text and detect name slots in it.
///
/// Returns the tokens alongside the slots so callers can index into them.
#[must_use]
pub fn detect_name_slots(text: &str) -> (Vec<String>, Vec<NameSlot>) {
    let tokens = split_raw_words(text);
    let slots = detect_name_slots_in_tokens(&tokens);
    (tokens, slots)
}
