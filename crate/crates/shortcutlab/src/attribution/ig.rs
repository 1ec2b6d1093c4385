// SPDX-License-Identifier: MIT OR Apache-2.0

//! Path-integrated gradient attribution.
//!
//! The input-embedding gradient of the logit difference says how the
//! decision responds to an infinitesimal nudge of each token's embedding —
//! but only locally. Integrating that gradient along the straight path
//! from a reference input to the actual one turns it into an exact
//! decomposition: the per-token scores sum to the total logit-difference
//! change between reference and input (the completeness identity,
//! checked by [`ig_completeness`]).
//!
//! The reference is the padding token at every position. Position
//! embeddings appear in both endpoints and cancel out of the path, so
//! scores measure token content only.

use rayon::prelude::*;

use super::{AttributionScores, Method};
use crate::error::{Error, Result};
use crate::model::{special_tokens, ModelParams};
use crate::numerics::{Matrix, Real};
use crate::training::backprop::{backprop, forward_tape, forward_tape_from, LossSeed};

/// Default number of Riemann-midpoint steps along the path.
pub const IG_DEFAULT_STEPS: usize = 64;

/// Integrated gradients of the logit difference with respect to each
/// token's embedding, reduced to one score per token.
///
/// Uses the midpoint rule with `steps` evaluation points: step `s` sits at
/// `α = (s + 0.5) / steps` along `baseline + α·(input − baseline)`. Steps
/// run in parallel; the reduction is in step order, so results are
/// schedule-independent.
///
/// # Errors
///
/// Returns [`Error::Config`] for fewer than 8 steps, [`Error::Numeric`]
/// if a gradient along the path is non-finite, and propagates embedding
/// errors for invalid tokens.
pub fn integrated_gradients(
    params: &ModelParams,
    tokens: &[u32],
    steps: usize,
) -> Result<AttributionScores> {
    if steps < 8 {
        return Err(Error::config(format!(
            "path integration needs at least 8 steps, got {steps}"
        )));
    }
    let x_input = params.embed(tokens)?;
    let baseline_tokens = vec![special_tokens::PAD; tokens.len()];
    let x_baseline = params.embed(&baseline_tokens)?;
    // Positions cancel here: row i is w_embed[token_i] − w_embed[pad].
    let diff = x_input.sub(&x_baseline)?;

    let gradients: Vec<Matrix> = (0..steps)
        .into_par_iter()
        .map(|s| {
            let alpha = (s as Real + 0.5) / steps as Real;
            let mut x = x_baseline.clone();
            x.add_scaled(&diff, alpha)?;
            let tape = forward_tape_from(params, x)?;
            let result = backprop(params, &tape, LossSeed::LogitDiff, None, true)?;
            let dx0 = result.dx0.expect("input gradient was requested");
            if !dx0.all_finite() {
                return Err(Error::numeric(format!(
                    "non-finite gradient at path point α = {alpha}"
                )));
            }
            Ok(dx0)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_gradient = Matrix::zeros(diff.rows(), diff.cols());
    for g in &gradients {
        mean_gradient.add_assign(g)?;
    }
    mean_gradient.scale(1.0 / steps as Real);

    let scores: Vec<Real> = (0..diff.rows())
        .map(|i| {
            diff.row(i)
                .iter()
                .zip(mean_gradient.row(i))
                .map(|(d, g)| d * g)
                .sum()
        })
        .collect();
    AttributionScores::new(Method::Ig, scores, Vec::new(), None)
}

/// How closely a run's scores add up to the logit-difference gap they are
/// supposed to decompose.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IgCompleteness {
    /// `Σ_i score(i)`.
    pub score_sum: Real,
    /// `LD(input) − LD(baseline)`.
    pub ld_gap: Real,
    /// `|score_sum − ld_gap| / max(|ld_gap|, 1e-12)`.
    pub relative_error: Real,
}

/// Run [`integrated_gradients`] and check its completeness identity.
///
/// # Errors
///
/// Propagates attribution and forward-pass errors.
pub fn ig_completeness(
    params: &ModelParams,
    tokens: &[u32],
    steps: usize,
) -> Result<IgCompleteness> {
    let attr = integrated_gradients(params, tokens, steps)?;
    let score_sum: Real = attr.scores.iter().sum();
    let ld_of = |toks: &[u32]| -> Result<Real> {
        let tape = forward_tape(params, toks)?;
        let (z_neg, z_pos) = tape.label_logits(params);
        Ok(z_pos - z_neg)
    };
    let baseline_tokens = vec![special_tokens::PAD; tokens.len()];
    let ld_gap = ld_of(tokens)? - ld_of(&baseline_tokens)?;
    Ok(IgCompleteness {
        score_sum,
        ld_gap,
        relative_error: (score_sum - ld_gap).abs() / ld_gap.abs().max(1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::RngStream;

    fn model(seed: u64, n_layers: usize) -> ModelParams {
        let config = ModelConfig {
            n_layers,
            n_heads: 2,
            d_resid: 16,
            d_head: 8,
            d_mlp: 24,
            vocab_size: 12,
            max_seq: 10,
        };
        let mut rng = RngStream::from_seed(seed);
        ModelParams::init(config, &mut rng).unwrap()
    }

    #[test]
    fn input_equal_to_baseline_scores_exactly_zero() {
        let params = model(3, 2);
        let tokens = vec![special_tokens::PAD; 5];
        let attr = integrated_gradients(&params, &tokens, 8).unwrap();
        assert!(attr.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn scores_add_up_to_the_logit_difference_gap() {
        // A freshly initialized model is nearly linear, which would make
        // this test vacuous; amplifying the weights pushes the GELUs and
        // attention softmaxes into their curved regions.
        let mut params = model(3, 2);
        params.for_each_tensor_mut(|_, t| t.scale(4.0));
        let tokens = vec![4, 9, 2, 11, 7, 5];
        let report = ig_completeness(&params, &tokens, 128).unwrap();
        assert!(
            report.ld_gap.abs() > 0.05,
            "test model is too bland to exercise completeness: {}",
            report.ld_gap
        );
        assert!(
            report.relative_error <= 0.02,
            "relative error {} (sum {}, gap {})",
            report.relative_error,
            report.score_sum,
            report.ld_gap
        );
    }

    #[test]
    fn doubling_steps_barely_moves_the_scores() {
        let params = model(7, 2);
        let tokens = vec![6, 1, 10, 3, 8];
        let coarse = integrated_gradients(&params, &tokens, 64).unwrap();
        let fine = integrated_gradients(&params, &tokens, 128).unwrap();
        let scale = fine
            .scores
            .iter()
            .fold(0.0_f64, |m, s| m.max(s.abs()))
            .max(1e-12);
        for (a, b) in coarse.scores.iter().zip(&fine.scores) {
            assert!(
                (a - b).abs() / scale < 0.01,
                "64-step {a} vs 128-step {b} (scale {scale})"
            );
        }
    }

    /// In a one-layer model with zeroed position embeddings, two positions
    /// holding the same token are fully interchangeable as far as the
    /// final-position logit difference is concerned, so their scores must
    /// coincide. (With more layers the earlier position gains extra
    /// influence paths through intermediate positions, and with position
    /// embeddings the path endpoints differ — both would break the
    /// symmetry for real reasons.)
    #[test]
    fn identical_tokens_at_symmetric_positions_score_equally() {
        let mut params = model(11, 1);
        for v in params.w_pos.data_mut() {
            *v = 0.0;
        }
        let tokens = vec![5, 9, 9, 7];
        let attr = integrated_gradients(&params, &tokens, 16).unwrap();
        assert!(
            (attr.scores[1] - attr.scores[2]).abs() <= 1e-12,
            "{} vs {}",
            attr.scores[1],
            attr.scores[2]
        );
        // Sanity: the shared token is not trivially inert.
        assert!(attr.scores[1].abs() > 0.0);
    }

    #[test]
    fn too_few_steps_is_rejected() {
        let params = model(13, 2);
        assert!(integrated_gradients(&params, &[1, 2, 3], 7).is_err());
        assert!(integrated_gradients(&params, &[1, 2, 3], 8).is_ok());
    }

    #[test]
    fn non_finite_gradients_surface_as_numeric_errors() {
        let mut params = model(17, 2);
        let pos = special_tokens::LABEL_POS as usize;
        params.w_unembed.set(0, pos, Real::INFINITY);
        let err = integrated_gradients(&params, &[1, 2, 3], 8).unwrap_err();
        assert_eq!(err.kind(), "numeric");
    }
}
