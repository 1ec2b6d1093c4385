// SPDX-License-Identifier: MIT OR Apache-2.0

//! Feature attribution: which input tokens carry the classifier's decision.
//!
//! Three detectors produce per-token signed scores aligned to the same
//! wrapped prompt:
//!
//! * **Head-based token attribution** ([`hta`]) reads the trained weights
//!   directly. For each selected head, the final-position attention row
//!   says *where* the head looked, and `LD(x^{l}_i · W_V W_O)` says what
//!   the residual at source position `i` would contribute to the logit
//!   difference if the head attended there fully. The product, summed over
//!   the selected heads, is the token's score. One cached forward pass, no
//!   sampling, and an exact per-head accounting identity (see
//!   [`hta_head_scores`]).
//! * **LIME** ([`lime`]) fits a weighted linear surrogate to the model's
//!   positive-class probability over randomly masked prompt variants.
//! * **Integrated gradients** ([`integrated_gradients`]) integrates the
//!   input-embedding gradient of the logit difference along the straight
//!   path from an all-padding baseline.
//!
//! Sub-token scores fold into per-word scores with
//! [`aggregate_word_scores`]; for generated reviews,
//! [`review_word_spans`] builds the token→word map, treating a two-token
//! name as a single word.

mod ig;
mod lime;

pub use ig::{ig_completeness, integrated_gradients, IgCompleteness, IG_DEFAULT_STEPS};
pub use lime::{lime, LimeConfig, LIME_DEEP_PERTURBATIONS};

use serde::{Deserialize, Serialize};

use crate::data::{prompt, Example};
use crate::error::{Error, Result};
use crate::interp::logit_diff_row;
use crate::model::{ActivationCache, ModelParams};
use crate::numerics::Real;

/// Which detector produced a set of scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hta,
    Lime,
    Ig,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Hta => "HTA",
            Method::Lime => "LIME",
            Method::Ig => "IG",
        })
    }
}

/// Per-token signed scores for one prompt, plus the head-selection
/// metadata when the method uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionScores {
    pub method: Method,
    /// One signed score per input token, all finite.
    pub scores: Vec<Real>,
    /// Heads the score sums over (head-based attribution only).
    pub heads: Vec<(usize, usize)>,
    /// Selection threshold used to pick `heads`, when one applies.
    pub tau: Option<Real>,
    /// Set when a singular surrogate fit fell back to a ridge solve.
    #[serde(default)]
    pub ridge_fallback: bool,
}

impl AttributionScores {
    /// Wrap raw scores, enforcing finiteness.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Numeric`] if any score is non-finite.
    pub fn new(
        method: Method,
        scores: Vec<Real>,
        heads: Vec<(usize, usize)>,
        tau: Option<Real>,
    ) -> Result<Self> {
        if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::numeric(format!(
                "{method} produced a non-finite score at token {bad}"
            )));
        }
        Ok(AttributionScores {
            method,
            scores,
            heads,
            tau,
            ridge_fallback: false,
        })
    }
}

/// Fraction of the largest head magnitude used for the default selection
/// threshold: a relative rule transfers across model sizes, where any fixed
/// absolute cutoff would not.
pub const DEFAULT_TAU_FRACTION: Real = 0.25;

/// Absolute selection threshold at `fraction` of the largest per-head
/// logit-difference magnitude on this cached run.
///
/// # Errors
///
/// Propagates shape errors from the logit-difference projection.
pub fn relative_tau(
    params: &ModelParams,
    cache: &ActivationCache,
    fraction: Real,
) -> Result<Real> {
    let t = cache.seq_len() - 1;
    let cfg = &params.config;
    let mut max_abs: Real = 0.0;
    for layer in 0..cfg.n_layers {
        for head in 0..cfg.n_heads {
            let ld = logit_diff_row(params, &cache.head_out[layer][head], t)?;
            max_abs = max_abs.max(ld.abs());
        }
    }
    Ok(fraction * max_abs)
}

/// Heads whose final-position output moves the logit difference by
/// strictly more than `tau` in magnitude, in layer-major order.
///
/// # Errors
///
/// Returns [`Error::Config`] for a negative or non-finite `tau`.
pub fn select_heads(
    params: &ModelParams,
    cache: &ActivationCache,
    tau: Real,
) -> Result<Vec<(usize, usize)>> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::config(format!(
            "head-selection threshold must be a finite non-negative number, got {tau}"
        )));
    }
    let t = cache.seq_len() - 1;
    let cfg = &params.config;
    let mut out = Vec::new();
    for layer in 0..cfg.n_layers {
        for head in 0..cfg.n_heads {
            let ld = logit_diff_row(params, &cache.head_out[layer][head], t)?;
            if ld.abs() > tau {
                out.push((layer, head));
            }
        }
    }
    Ok(out)
}

/// One head's per-token attribution:
/// `score(i) = A^{l,h}_{T,i} · LD(x^{l}_i · W_V W_O)`
/// where `x^l` is the residual stream *entering* layer `l`.
///
/// Because the head's output at the final position is exactly the
/// attention-weighted sum of those value contributions, these scores sum
/// to the head's own direct logit contribution `LD(a^{l,h}_T)` — the
/// accounting identity the whole method rests on.
///
/// # Errors
///
/// Returns [`Error::NotFound`] for an out-of-range layer or head.
pub fn hta_head_scores(
    params: &ModelParams,
    cache: &ActivationCache,
    layer: usize,
    head: usize,
) -> Result<Vec<Real>> {
    let vo = params.head_vo(layer, head)?;
    let n = cache.seq_len();
    let t = n - 1;
    let projected = cache.resid[layer].matmul(&vo)?;
    let attn = &cache.attn[layer][head];
    (0..n)
        .map(|i| Ok(attn.get(t, i) * logit_diff_row(params, &projected, i)?))
        .collect()
}

/// Head-based token attribution: per-token scores summed over the heads
/// selected at threshold `tau` (see [`select_heads`]).
///
/// The cache must come from an unhooked forward pass of `params`.
///
/// # Errors
///
/// Propagates selection and shape errors.
pub fn hta(
    params: &ModelParams,
    cache: &ActivationCache,
    tau: Real,
) -> Result<AttributionScores> {
    let heads = select_heads(params, cache, tau)?;
    let mut scores = vec![0.0; cache.seq_len()];
    for &(layer, head) in &heads {
        let per_token = hta_head_scores(params, cache, layer, head)?;
        for (acc, s) in scores.iter_mut().zip(per_token) {
            *acc += s;
        }
    }
    AttributionScores::new(Method::Hta, scores, heads, Some(tau))
}

/// How sub-token scores reduce to one score per word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggMode {
    Max,
    Sum,
}

/// Word-aggregation policy. The default takes the maximum of absolute
/// scores, so a word is as important as its most important token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    pub mode: AggMode,
    /// Reduce `|score|` instead of the signed score (default true).
    pub absolute: bool,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        AggregationPolicy {
            mode: AggMode::Max,
            absolute: true,
        }
    }
}

/// One word's contiguous token span inside a scored sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word: String,
    /// First token index of the span.
    pub start: usize,
    /// Number of tokens in the span (≥ 1).
    pub len: usize,
}

/// Reduce per-token scores to per-word scores.
///
/// Spans must be in ascending order and non-overlapping; each must be
/// non-empty and in range.
///
/// # Errors
///
/// Returns [`Error::Shape`] when a span is empty, out of range, or
/// overlaps or precedes an earlier one.
pub fn aggregate_word_scores(
    scores: &[Real],
    spans: &[WordSpan],
    policy: AggregationPolicy,
) -> Result<Vec<Real>> {
    let mut out = Vec::with_capacity(spans.len());
    let mut prev_end = 0usize;
    for span in spans {
        if span.len == 0 {
            return Err(Error::shape(format!("empty word span for {:?}", span.word)));
        }
        if span.start < prev_end {
            return Err(Error::shape(format!(
                "word span {:?} at {} overlaps or precedes the previous span",
                span.word, span.start
            )));
        }
        let end = span.start + span.len;
        if end > scores.len() {
            return Err(Error::shape(format!(
                "word span {:?} [{}, {end}) exceeds {} scores",
                span.word, span.start,
                scores.len()
            )));
        }
        prev_end = end;
        let vals = scores[span.start..end]
            .iter()
            .map(|s| if policy.absolute { s.abs() } else { *s });
        out.push(match policy.mode {
            AggMode::Max => vals.fold(Real::NEG_INFINITY, Real::max),
            AggMode::Sum => vals.sum(),
        });
    }
    Ok(out)
}

/// Word spans of a generated review, in *wrapped-prompt* coordinates.
///
/// Every review token is its own one-token word except name slots, which
/// become a single word covering their tokens ("Marcus Hale" scores as one
/// word). Prompt scaffolding before and after the review carries no spans.
#[must_use]
pub fn review_word_spans(example: &Example) -> Vec<WordSpan> {
    let tokens = example.tokens();
    let offset = prompt::REVIEW_TOKEN_OFFSET;
    let mut spans = Vec::with_capacity(tokens.len());
    let mut slot_iter = example.slots.iter().peekable();
    let mut i = 0;
    while i < tokens.len() {
        let slot_here = slot_iter.peek().filter(|s| s.start == i).copied();
        if let Some(slot) = slot_here {
            spans.push(WordSpan {
                word: tokens[slot.start..slot.end()].join(" "),
                start: offset + slot.start,
                len: slot.len,
            });
            i = slot.end();
            slot_iter.next();
        } else {
            spans.push(WordSpan {
                word: tokens[i].to_string(),
                start: offset + i,
                len: 1,
            });
            i += 1;
        }
    }
    spans
}

/// One attribution dump row: everything needed to re-render or re-score a
/// single review without the model. Written with
/// [`crate::data::write_jsonl`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub example_id: String,
    pub method: Method,
    /// Wrapped prompt tokens the scores align to.
    pub tokens: Vec<String>,
    pub scores: Vec<Real>,
    /// Review words (names joined into one word).
    pub words: Vec<String>,
    pub word_scores: Vec<Real>,
    pub heads: Vec<(usize, usize)>,
    pub tau: Option<Real>,
}

/// Assemble a dump row from one review's scores.
///
/// # Errors
///
/// Returns [`Error::Shape`] if the score vector does not match the wrapped
/// prompt's length.
pub fn attribution_record(
    example: &Example,
    attr: &AttributionScores,
    policy: AggregationPolicy,
) -> Result<AttributionRecord> {
    let tokens: Vec<String> = prompt::wrap_review(&example.text)
        .split_whitespace()
        .map(str::to_string)
        .collect();
    if attr.scores.len() != tokens.len() {
        return Err(Error::shape(format!(
            "{} scores for a {}-token wrapped prompt ({})",
            attr.scores.len(),
            tokens.len(),
            example.id
        )));
    }
    let spans = review_word_spans(example);
    let word_scores = aggregate_word_scores(&attr.scores, &spans, policy)?;
    Ok(AttributionRecord {
        example_id: example.id.clone(),
        method: attr.method,
        tokens,
        scores: attr.scores.clone(),
        words: spans.into_iter().map(|s| s.word).collect(),
        word_scores,
        heads: attr.heads.clone(),
        tau: attr.tau,
    })
}
