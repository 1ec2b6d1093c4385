// SPDX-License-Identifier: MIT OR Apache-2.0

//! The fixed classification prompt template.
//!
//! Every review is wrapped in the same instruction scaffold before being
//! fed to the model; the label is read from the logits at the **final**
//! token (the trailing `:`). Because the prefix length is constant, review
//! token `i` always sits at absolute position `i + REVIEW_TOKEN_OFFSET`,
//! which keeps attribution outputs alignable with review-relative slots.

/// Tokens before the review body (11 tokens).
pub const PROMPT_PREFIX: &str =
    r#"Classify the sentiment of the movie review : Review : """"#;

/// Tokens after the review body (12 tokens).
pub const PROMPT_SUFFIX: &str = r#"""" LABEL OPTIONS : A : negative B : positive LABEL :"#;

/// Absolute position of review token 0 inside a wrapped sequence.
pub const REVIEW_TOKEN_OFFSET: usize = 11;

/// Number of template tokens after the review body.
pub const SUFFIX_TOKEN_COUNT: usize = 12;

/// Wrap a review body in the classification template.
#[must_use]
pub fn wrap_review(review: &str) -> String {
    format!("{PROMPT_PREFIX} {review} {PROMPT_SUFFIX}")
}

/// Total wrapped length for a review of `review_tokens` tokens.
#[must_use]
pub fn wrapped_len(review_tokens: usize) -> usize {
    REVIEW_TOKEN_OFFSET + review_tokens + SUFFIX_TOKEN_COUNT
}

/// Distinct words contributed by the template (for vocabulary building).
pub fn template_words() -> impl Iterator<Item = &'static str> {
    PROMPT_PREFIX
        .split_whitespace()
        .chain(PROMPT_SUFFIX.split_whitespace())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_token_counts_are_pinned() {
        assert_eq!(PROMPT_PREFIX.split_whitespace().count(), REVIEW_TOKEN_OFFSET);
        assert_eq!(PROMPT_SUFFIX.split_whitespace().count(), SUFFIX_TOKEN_COUNT);
    }

    #[test]
    fn wrapping_is_pure_concatenation_at_the_token_level() {
        let review = "the movie was great .";
        let wrapped = wrap_review(review);
        let tokens: Vec<&str> = wrapped.split_whitespace().collect();
        let review_tokens: Vec<&str> = review.split_whitespace().collect();
        assert_eq!(tokens.len(), wrapped_len(review_tokens.len()));
        assert_eq!(
            &tokens[REVIEW_TOKEN_OFFSET..REVIEW_TOKEN_OFFSET + review_tokens.len()],
            review_tokens.as_slice()
        );
        assert_eq!(*tokens.last().unwrap(), ":");
    }

    #[test]
    fn label_options_appear_in_the_suffix() {
        let wrapped = wrap_review("fine .");
        let tokens: Vec<&str> = wrapped.split_whitespace().collect();
        let a_pos = tokens.iter().position(|t| *t == "A").unwrap();
        let b_pos = tokens.iter().position(|t| *t == "B").unwrap();
        assert!(a_pos < b_pos);
        assert_eq!(tokens[a_pos + 2], "negative");
        assert_eq!(tokens[b_pos + 2], "positive");
    }
}
