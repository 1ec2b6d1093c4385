// SPDX-License-Identifier: MIT OR Apache-2.0

//! Word-level tokenizer with a closed, bank-derived vocabulary.
//!
//! The vocabulary is built from the static name banks, phrase banks, and
//! prompt-template words — **not** from any realized corpus — so it is
//! identical across corpus seeds and sizes. Tokens are case-sensitive
//! whitespace-separated words; ids 0–3 are pinned special tokens.
//!
//! | id | token | role |
//! |----|-------|------|
//! | 0  | `<pad>` | padding / perturbation mask |
//! | 1  | `<unk>` | out-of-vocabulary word |
//! | 2  | `A`     | negative label option |
//! | 3  | `B`     | positive label option |

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::special_tokens;
use super::{names, phrases, prompt};

/// Padding token string.
pub const PAD_TOKEN: &str = "<pad>";
/// Unknown-word token string.
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

/// Case-sensitive word-level tokenizer.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

impl Tokenizer {
    /// Build the standard lab vocabulary from the static banks.
    ///
    /// Layout: the four specials, then every other known word in sorted
    /// order. Construction is fully deterministic.
    #[must_use]
    pub fn lab_vocab() -> Self {
        let mut words: BTreeSet<&str> = BTreeSet::new();
        words.extend(names::all_components());
        words.extend(phrases::all_body_words());
        words.extend(prompt::template_words());
        words.remove("A");
        words.remove("B");
        let mut tokens: Vec<String> = vec![
            PAD_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
            "A".to_string(),
            "B".to_string(),
        ];
        tokens.extend(words.into_iter().map(str::to_string));
        Self::from_tokens(tokens).expect("bank vocabulary is well-formed")
    }

    /// Build from an explicit token list (specials must come first).
    ///
    /// # Errors
    ///
    /// Returns an error on duplicate tokens or if ids 0–3 are not the
    /// pinned specials.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 4 {
            return Err(Error::tokenizer("vocabulary must include the 4 special tokens"));
        }
        let expect = [PAD_TOKEN, UNK_TOKEN, "A", "B"];
        for (i, want) in expect.iter().enumerate() {
            if tokens[i] != *want {
                return Err(Error::tokenizer(format!(
                    "special token slot {i} must be {want:?}, found {:?}",
                    tokens[i]
                )));
            }
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(Error::tokenizer(format!("duplicate token {t:?}")));
            }
        }
        Ok(Tokenizer {
            id_to_token: tokens,
            token_to_id,
        })
    }

    /// Number of entries in the vocabulary.
    #[must_use]
    pub fn vocab_size(&self) -> usize {
        self.id_to_token.len()
    }

    /// Id for a token, if present.
    #[must_use]
    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Encode whitespace-separated text; unknown words map to `<unk>`.
    #[must_use]
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|w| {
                self.token_to_id
                    .get(w)
                    .copied()
                    .unwrap_or(special_tokens::UNK)
            })
            .collect()
    }

    /// Encode, erroring on any out-of-vocabulary word.
    ///
    /// # Errors
    ///
    /// Returns an error naming every unknown word.
    pub fn encode_strict(&self, text: &str) -> Result<Vec<u32>> {
        let unknown: Vec<&str> = text
            .split_whitespace()
            .filter(|w| !self.token_to_id.contains_key(*w))
            .collect();
        if unknown.is_empty() {
            Ok(self.encode(text))
        } else {
            Err(Error::tokenizer(format!("unknown words: {unknown:?}")))
        }
    }

    /// Decode ids back to space-joined text.
    ///
    /// # Errors
    ///
    /// Returns an error for out-of-range ids.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut words = Vec::with_capacity(ids.len());
        for &id in ids {
            let token = self
                .id_to_token
                .get(id as usize)
                .ok_or_else(|| Error::tokenizer(format!("id {id} out of range")))?;
            words.push(token.as_str());
        }
        Ok(words.join(" "))
    }

    /// Token string for an id, if in range.
    #[must_use]
    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Write the vocabulary as JSON.
    ///
    /// # Errors
    ///
    /// Returns an error if the file cannot be written.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = VocabFile {
            tokens: self.id_to_token.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Load a vocabulary written by [`Tokenizer::save`].
    ///
    /// # Errors
    ///
    /// Returns an error if the file is missing or malformed.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: VocabFile = serde_json::from_str(&raw)?;
        Self::from_tokens(file.tokens)
    }
}

/// Split raw prose into word tokens, peeling leading/trailing punctuation
/// off each whitespace chunk as separate tokens. Inner punctuation (as in
/// `it's`) stays attached. Capitalization is preserved.
#[must_use]
pub fn split_raw_words(text: &str) -> Vec<String> {
    const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')'];
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut lead = Vec::new();
        let mut core = chunk;
        while let Some(c) = core.chars().next() {
            if PUNCT.contains(&c) {
                lead.push(c.to_string());
                core = &core[c.len_utf8()..];
            } else {
                break;
            }
        }
        let mut trail = Vec::new();
        while let Some(c) = core.chars().last() {
            if PUNCT.contains(&c) {
                trail.push(c.to_string());
                core = &core[..core.len() - c.len_utf8()];
            } else {
                break;
            }
        }
        out.extend(lead);
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(trail.into_iter().rev());
    }
    out
}
