// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local surrogate attribution over masked prompt variants.
//!
//! The idea: if hiding a token changes the classifier's positive
//! probability, that token mattered. Rather than try every subset, sample
//! masked variants, query the model on each, and fit a weighted linear
//! model from "which tokens were kept" to the predicted probability. The
//! fitted coefficients are the per-token scores.
//!
//! Masked tokens are replaced by the padding token (never deleted), so
//! every variant keeps the original length and position embeddings stay
//! honest. Variants that keep more of the prompt count more in the fit,
//! through a Gaussian kernel on cosine distance between mask vectors.

use rayon::prelude::*;

use super::{AttributionScores, Method};
use crate::error::{Error, Result};
use crate::model::special_tokens;
use crate::numerics::{Matrix, Real, RngStream};

/// Perturbation-count preset for slower, lower-variance runs.
pub const LIME_DEEP_PERTURBATIONS: usize = 3000;

/// Knobs for the surrogate fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    /// Number of model queries, including the unmasked original.
    pub n_perturbations: usize,
    /// Kernel width for the proximity weight `exp(−d²/width²)`.
    pub kernel_width: Real,
    /// Diagonal boost applied only when the plain fit is singular.
    pub ridge: Real,
    /// Positions eligible for masking; `None` means every position.
    /// Scores at ineligible positions are 0.
    pub mask_positions: Option<Vec<usize>>,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_perturbations: 1000,
            kernel_width: 25.0,
            ridge: 1e-3,
            mask_positions: None,
        }
    }
}

/// Proximity of a mask vector to the all-kept original: Gaussian kernel on
/// the cosine distance between the two binary vectors. Keeping `k` of `m`
/// tokens gives cosine similarity `√(k/m)`; the empty mask gets
/// similarity 0 by convention.
fn proximity_weight(kept: usize, total: usize, kernel_width: Real) -> Real {
    let similarity = if kept == 0 {
        0.0
    } else {
        (kept as Real / total as Real).sqrt()
    };
    let d = 1.0 - similarity;
    (-(d * d) / (kernel_width * kernel_width)).exp()
}

/// Fit a weighted linear surrogate to `predict` around `tokens` and return
/// its coefficients as per-token scores.
///
/// `predict` maps a full token sequence to the model's positive-class
/// probability (any bounded scalar works). The first query is always the
/// unmasked original; the rest mask a uniformly sized random subset of the
/// eligible positions. Queries run in parallel; results are identical for
/// a given `(rng, n_perturbations)` regardless of thread schedule.
///
/// # Errors
///
/// Returns [`Error::Config`] for fewer than 10 perturbations, an empty
/// prompt, or empty/out-of-range mask positions; [`Error::Numeric`] if
/// even the ridge-stabilized fit is singular; and whatever `predict`
/// returns on failure.
pub fn lime<F>(
    predict: F,
    tokens: &[u32],
    config: &LimeConfig,
    rng: &mut RngStream,
) -> Result<AttributionScores>
where
    F: Fn(&[u32]) -> Result<Real> + Sync,
{
    if config.n_perturbations < 10 {
        return Err(Error::config(format!(
            "surrogate fit needs at least 10 perturbations, got {}",
            config.n_perturbations
        )));
    }
    if tokens.is_empty() {
        return Err(Error::config("cannot attribute an empty prompt"));
    }
    let maskable: Vec<usize> = match &config.mask_positions {
        None => (0..tokens.len()).collect(),
        Some(positions) => {
            if positions.is_empty() {
                return Err(Error::config("no maskable positions given"));
            }
            let set: std::collections::BTreeSet<usize> = positions.iter().copied().collect();
            if let Some(&bad) = set.iter().find(|&&p| p >= tokens.len()) {
                return Err(Error::config(format!(
                    "maskable position {bad} outside the {}-token prompt",
                    tokens.len()
                )));
            }
            set.into_iter().collect()
        }
    };
    let m = maskable.len();

    // Draw all masks up front so the rng stream is independent of how the
    // queries are scheduled. `true` = token kept.
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(config.n_perturbations);
    masks.push(vec![true; m]);
    let mut scratch: Vec<usize> = (0..m).collect();
    for _ in 1..config.n_perturbations {
        let n_masked = 1 + rng.gen_range(m);
        rng.shuffle(&mut scratch);
        let mut mask = vec![true; m];
        for &j in &scratch[..n_masked] {
            mask[j] = false;
        }
        masks.push(mask);
    }

    let responses: Vec<Real> = masks
        .par_iter()
        .map(|mask| {
            let mut variant = tokens.to_vec();
            for (j, &keep) in mask.iter().enumerate() {
                if !keep {
                    variant[maskable[j]] = special_tokens::PAD;
                }
            }
            predict(&variant)
        })
        .collect::<Result<Vec<_>>>()?;

    // Weighted least squares via the normal equations. Unknowns: intercept
    // followed by one coefficient per maskable position.
    let p = m + 1;
    let mut gram = Matrix::zeros(p, p);
    let mut moment = vec![0.0; p];
    let mut feature = vec![0.0; p];
    for (mask, &y) in masks.iter().zip(&responses) {
        let kept = mask.iter().filter(|&&keep| keep).count();
        let w = proximity_weight(kept, m, config.kernel_width);
        feature[0] = 1.0;
        for (j, &keep) in mask.iter().enumerate() {
            feature[1 + j] = if keep { 1.0 } else { 0.0 };
        }
        for i in 0..p {
            if feature[i] == 0.0 {
                continue;
            }
            let wf = w * feature[i];
            let row = gram.row_mut(i);
            for (k, &f) in feature.iter().enumerate() {
                row[k] += wf * f;
            }
            moment[i] += wf * y;
        }
    }

    let (theta, ridged) = match gram.solve(&moment) {
        Ok(theta) => (theta, false),
        Err(_) => {
            let mut stabilized = gram.clone();
            for i in 0..p {
                let v = stabilized.get(i, i) + config.ridge;
                stabilized.set(i, i, v);
            }
            (stabilized.solve(&moment)?, true)
        }
    };

    let mut scores = vec![0.0; tokens.len()];
    for (j, &pos) in maskable.iter().enumerate() {
        scores[pos] = theta[1 + j];
    }
    let mut attr = AttributionScores::new(Method::Lime, scores, Vec::new(), None)?;
    attr.ridge_fallback = ridged;
    Ok(attr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(label: &str) -> RngStream {
        RngStream::from_seed(71).split(label)
    }

    #[test]
    fn constant_predictor_yields_zero_coefficients() {
        let tokens: Vec<u32> = (4..16).collect();
        let mut rng = seeded("const");
        let attr = lime(
            |_| Ok(0.7),
            &tokens,
            &LimeConfig {
                n_perturbations: 200,
                ..LimeConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        assert!(!attr.ridge_fallback);
        assert!(attr.scores.iter().all(|s| s.abs() <= 1e-8), "{:?}", attr.scores);
    }

    #[test]
    fn presence_of_one_token_dominates_the_fit() {
        let tokens: Vec<u32> = vec![9, 8, 7, 6, 5, 4, 3, 2];
        let target_pos = 3;
        let mut rng = seeded("presence");
        let attr = lime(
            |toks: &[u32]| Ok(if toks[target_pos] == 6 { 1.0 } else { 0.0 }),
            &tokens,
            &LimeConfig {
                n_perturbations: 300,
                ..LimeConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let top = attr.scores[target_pos].abs();
        for (i, s) in attr.scores.iter().enumerate() {
            if i != target_pos {
                assert!(
                    top > 5.0 * s.abs(),
                    "coefficient {i} = {s} rivals the target's {top}"
                );
            }
        }
        assert!((attr.scores[target_pos] - 1.0).abs() < 1e-6);
    }

    /// With a predictor that is exactly linear in the kept-token
    /// indicators, weighted least squares must recover the coefficients
    /// regardless of masks and weights — a ground-truth oracle for the
    /// whole fit path on a 10-token case.
    #[test]
    fn fit_recovers_an_exactly_linear_predictor() {
        let tokens: Vec<u32> = (10..20).collect();
        let truth: Vec<Real> = (0..10).map(|j| 0.05 * j as Real - 0.2).collect();
        let truth_for_predictor = truth.clone();
        let mut rng = seeded("linear");
        let attr = lime(
            move |toks: &[u32]| {
                let mut y = 0.3;
                for (j, &t) in toks.iter().enumerate() {
                    if t != special_tokens::PAD {
                        y += truth_for_predictor[j];
                    }
                }
                Ok(y)
            },
            &tokens,
            &LimeConfig {
                n_perturbations: 400,
                ..LimeConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        assert!(!attr.ridge_fallback);
        for (got, want) in attr.scores.iter().zip(&truth) {
            assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn fits_are_deterministic_for_a_seed() {
        let tokens: Vec<u32> = (1..24).collect();
        let predictor = |toks: &[u32]| {
            Ok(toks
                .iter()
                .map(|&t| if t == special_tokens::PAD { 0.0 } else { 0.01 * t as Real })
                .sum())
        };
        let config = LimeConfig {
            n_perturbations: 60,
            ..LimeConfig::default()
        };
        let a = lime(predictor, &tokens, &config, &mut seeded("det")).unwrap();
        let b = lime(predictor, &tokens, &config, &mut seeded("det")).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn restricting_mask_positions_pins_other_scores_to_zero() {
        let tokens: Vec<u32> = vec![5, 6, 7, 8, 9, 10];
        let mut rng = seeded("restrict");
        let attr = lime(
            |toks: &[u32]| Ok(if toks[1] == 6 { 0.9 } else { 0.1 }),
            &tokens,
            &LimeConfig {
                n_perturbations: 100,
                mask_positions: Some(vec![1, 4]),
                ..LimeConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        for (i, s) in attr.scores.iter().enumerate() {
            if i == 1 {
                assert!((s - 0.8).abs() < 1e-6, "causal coefficient {s}");
            } else if i != 4 {
                assert_eq!(*s, 0.0, "position {i}");
            }
        }
    }

    /// More unknowns than samples makes the plain normal equations
    /// singular; the ridge path must kick in, be flagged, and still return
    /// finite scores.
    #[test]
    fn singular_fit_falls_back_to_ridge_and_is_flagged() {
        let tokens: Vec<u32> = (1..30).collect();
        let mut rng = seeded("ridge");
        let attr = lime(
            |toks: &[u32]| Ok(toks.iter().filter(|&&t| t != 0).count() as Real * 0.01),
            &tokens,
            &LimeConfig {
                n_perturbations: 10,
                ..LimeConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        assert!(attr.ridge_fallback);
        assert!(attr.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn preconditions_are_enforced() {
        let mut rng = seeded("pre");
        let ok = |_: &[u32]| Ok(0.5);
        assert!(lime(
            ok,
            &[1, 2, 3],
            &LimeConfig {
                n_perturbations: 9,
                ..LimeConfig::default()
            },
            &mut rng
        )
        .is_err());
        assert!(lime(ok, &[], &LimeConfig::default(), &mut rng).is_err());
        assert!(lime(
            ok,
            &[1, 2, 3],
            &LimeConfig {
                mask_positions: Some(vec![]),
                ..LimeConfig::default()
            },
            &mut rng
        )
        .is_err());
        assert!(lime(
            ok,
            &[1, 2, 3],
            &LimeConfig {
                mask_positions: Some(vec![7]),
                ..LimeConfig::default()
            },
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn predictor_errors_propagate() {
        let mut rng = seeded("err");
        let failing = |_: &[u32]| -> Result<Real> { Err(Error::numeric("boom")) };
        assert!(lime(failing, &[1, 2, 3], &LimeConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn proximity_weight_is_one_at_the_original_and_decays() {
        assert_eq!(proximity_weight(10, 10, 25.0), 1.0);
        let w_half = proximity_weight(5, 10, 25.0);
        let w_none = proximity_weight(0, 10, 25.0);
        assert!(w_none < w_half && w_half < 1.0);
        // Distances live in [0, 1], so a width-25 kernel keeps all weights
        // close to 1 — the fit is nearly unweighted, by design.
        assert!(w_none > 0.99);
    }
}
