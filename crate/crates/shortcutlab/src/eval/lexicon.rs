// SPDX-License-Identifier: MIT OR Apache-2.0

//! A small bundled sentiment word list.
//!
//! Shipping the list inside the binary keeps the attribution-character
//! metrics free of runtime downloads or environment-dependent resources;
//! 100 words per polarity is plenty for a vocabulary this size.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Sentiment word list split by polarity. Words are lowercase; lookups
/// fold case so capitalized review tokens still match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

const BUNDLED: &str = include_str!("sentiment_lexicon.txt");

impl Lexicon {
    /// The lexicon compiled into the binary: 100 positive and 100
    /// negative words covering the corpus phrase banks.
    #[must_use]
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("the bundled lexicon is well-formed")
    }

    /// Parse a lexicon from `"+ word"` / `"- word"` lines. `#` comments
    /// and blank lines are ignored.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Config`] for a malformed line, a duplicate word,
    /// or a word listed under both polarities.
    pub fn parse(text: &str) -> Result<Self> {
        let mut positive = BTreeSet::new();
        let mut negative = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (polarity, word) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p @ ("+" | "-")), Some(w), None) => (p, w),
                _ => {
                    return Err(Error::config(format!(
                        "lexicon line {}: expected \"+ word\" or \"- word\", got {line:?}",
                        lineno + 1
                    )))
                }
            };
            let word = word.to_lowercase();
            let inserted = if polarity == "+" {
                positive.insert(word.clone())
            } else {
                negative.insert(word.clone())
            };
            if !inserted {
                return Err(Error::config(format!(
                    "lexicon line {}: duplicate word {word:?}",
                    lineno + 1
                )));
            }
        }
        if let Some(both) = positive.intersection(&negative).next() {
            return Err(Error::config(format!(
                "lexicon lists {both:?} under both polarities"
            )));
        }
        Ok(Lexicon { positive, negative })
    }

    /// Whether `word` is a sentiment word of either polarity
    /// (case-insensitive).
    #[must_use]
    pub fn contains(&self, word: &str) -> bool {
        let folded = word.to_lowercase();
        self.positive.contains(&folded) || self.negative.contains(&folded)
    }

    /// Positive words, sorted.
    pub fn positive(&self) -> impl Iterator<Item = &str> {
        self.positive.iter().map(String::as_str)
    }

    /// Negative words, sorted.
    pub fn negative(&self) -> impl Iterator<Item = &str> {
        self.negative.iter().map(String::as_str)
    }

    /// `(n_positive, n_negative)`.
    #[must_use]
    pub fn sizes(&self) -> (usize, usize) {
        (self.positive.len(), self.negative.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_has_a_hundred_words_per_polarity() {
        let lex = Lexicon::bundled();
        assert_eq!(lex.sizes(), (100, 100));
    }

    #[test]
    fn bundled_words_are_single_lowercase_tokens() {
        let lex = Lexicon::bundled();
        for w in lex.positive().chain(lex.negative()) {
            assert!(
                w.chars().all(|c| c.is_ascii_lowercase()),
                "unexpected lexicon word {w:?}"
            );
        }
    }

    /// The strongly polar words the corpus phrase banks lean on must all
    /// be present, or the sentiment-hit metric would undercount by
    /// construction.
    #[test]
    fn bundled_lexicon_covers_the_phrase_banks() {
        let lex = Lexicon::bundled();
        for w in [
            "great",
            "wonderful",
            "thrilling",
            "superb",
            "brilliant",
            "moving",
            "funny",
            "delight",
            "joy",
            "satisfying",
            "charming",
            "heartfelt",
        ] {
            assert!(lex.contains(w), "missing positive bank word {w:?}");
        }
        for w in [
            "terrible",
            "dull",
            "sloppy",
            "lifeless",
            "hollow",
            "frustrating",
            "forgettable",
            "disappointing",
            "mess",
            "tedious",
            "drab",
            "joyless",
        ] {
            assert!(lex.contains(w), "missing negative bank word {w:?}");
        }
    }

    #[test]
    fn lookups_fold_case_and_reject_absentees() {
        let lex = Lexicon::bundled();
        assert!(lex.contains("Great"));
        assert!(lex.contains("TERRIBLE"));
        assert!(!lex.contains("Marcus"));
        assert!(!lex.contains("the"));
    }

    #[test]
    fn parser_rejects_malformed_input() {
        assert!(Lexicon::parse("+ good\n- bad").is_ok());
        assert!(Lexicon::parse("* good").is_err());
        assert!(Lexicon::parse("+ good extra").is_err());
        assert!(Lexicon::parse("+ good\n+ good").is_err());
        assert!(Lexicon::parse("+ good\n- good").is_err());
        let empty = Lexicon::parse("# nothing\n\n").unwrap();
        assert_eq!(empty.sizes(), (0, 0));
    }
}
