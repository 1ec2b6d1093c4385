// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quantifying the shortcut and the detectors pointed at it.
//!
//! Three families of numbers, all pure functions over score arrays or
//! prediction tables:
//!
//! * **Shortcut impact** — accuracy on original reviews versus the same
//!   reviews with the anti-correlated actor swapped in. Averaging the
//!   per-class drop gives a single number ([`acac_from_cells`]): 0 for a
//!   name-blind classifier, large when the name overrides the sentiment.
//! * **Detector quality** — given attribution scores for reviews with and
//!   without the shortcut name, [`auroc`] asks how well the score ranks
//!   the two groups, and [`cohens_d`] how far apart their means sit in
//!   pooled-standard-deviation units.
//! * **Attribution character** — how concentrated scores are
//!   ([`entropy_nat`]), where inside a multi-token word the mass lands,
//!   and whether top-scored words are sentiment words at all
//!   ([`attribution_character`]).

mod lexicon;
pub mod sweep;

pub use lexicon::Lexicon;
pub use sweep::{sweep, PipelineRun, SweepAxis, SweepConfig, SweepPointResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::WordSpan;
use crate::data::{Label, Tokenizer, Triplet, Variant};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::Real;
use crate::training::predict;

/// Accuracy (percent) of one class under each name condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantAccuracies {
    /// Reviews as generated (random filler actors).
    pub original: Real,
    /// Slots rewritten to the actor correlated with this class.
    pub correlated: Real,
    /// Slots rewritten to the actor correlated with the *other* class.
    pub anti: Real,
}

/// The full accuracy table over test triplets, and the single-number
/// summary of how much the anti-correlated name costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortcutImpactReport {
    pub n_positive: usize,
    pub n_negative: usize,
    pub positive: VariantAccuracies,
    pub negative: VariantAccuracies,
    /// `½ Σ_c [Acc(original_c) − Acc(anti_c)]`, in accuracy points.
    pub acac: Real,
}

impl ShortcutImpactReport {
    /// Class-weighted accuracy on the original (untouched) reviews.
    #[must_use]
    pub fn overall_original_accuracy(&self) -> Real {
        let n = (self.n_positive + self.n_negative) as Real;
        (self.positive.original * self.n_positive as Real
            + self.negative.original * self.n_negative as Real)
            / n
    }
}

/// The anti-correlated accuracy change, from its four table cells
/// (percentages): `½ [(pos_og − pos_ac) + (neg_og − neg_ac)]`.
#[must_use]
pub fn acac_from_cells(pos_og: Real, pos_ac: Real, neg_og: Real, neg_ac: Real) -> Real {
    0.5 * ((pos_og - pos_ac) + (neg_og - neg_ac))
}

/// Evaluate a model over test triplets and assemble the accuracy table.
///
/// Predictions for the three variants of each triplet run in parallel
/// across triplets; the counts are integers, so the result is independent
/// of thread schedule.
///
/// # Errors
///
/// Returns [`Error::Config`] if either class has no triplets, and
/// propagates tokenization/forward errors.
pub fn shortcut_impact(
    params: &ModelParams,
    tok: &Tokenizer,
    triplets: &[Triplet],
) -> Result<ShortcutImpactReport> {
    #[derive(Default, Clone, Copy)]
    struct Counts {
        n: usize,
        original: usize,
        correlated: usize,
        anti: usize,
    }
    let per_triplet = |t: &Triplet| -> Result<(Label, Counts)> {
        let mut c = Counts {
            n: 1,
            ..Counts::default()
        };
        for variant in Variant::ALL {
            let tokens = tok.encode_strict(&crate::data::prompt::wrap_review(t.text(variant)))?;
            let (is_positive, _, _) = predict(params, &tokens)?;
            let correct = is_positive == t.label.is_positive();
            let is_correlated_actor = match t.label {
                Label::Positive => variant == Variant::Good,
                Label::Negative => variant == Variant::Bad,
            };
            match variant {
                Variant::Original => c.original += usize::from(correct),
                _ if is_correlated_actor => c.correlated += usize::from(correct),
                _ => c.anti += usize::from(correct),
            }
        }
        Ok((t.label, c))
    };
    let tallies = triplets
        .par_iter()
        .map(per_triplet)
        .collect::<Result<Vec<_>>>()?;
    let mut pos = Counts::default();
    let mut neg = Counts::default();
    for (label, c) in tallies {
        let acc = if label.is_positive() { &mut pos } else { &mut neg };
        acc.n += c.n;
        acc.original += c.original;
        acc.correlated += c.correlated;
        acc.anti += c.anti;
    }
    if pos.n == 0 || neg.n == 0 {
        return Err(Error::config(format!(
            "accuracy table needs both classes, got {} positive / {} negative triplets",
            pos.n, neg.n
        )));
    }
    let pct = |count: usize, n: usize| 100.0 * count as Real / n as Real;
    let positive = VariantAccuracies {
        original: pct(pos.original, pos.n),
        correlated: pct(pos.correlated, pos.n),
        anti: pct(pos.anti, pos.n),
    };
    let negative = VariantAccuracies {
        original: pct(neg.original, neg.n),
        correlated: pct(neg.correlated, neg.n),
        anti: pct(neg.anti, neg.n),
    };
    Ok(ShortcutImpactReport {
        n_positive: pos.n,
        n_negative: neg.n,
        positive,
        negative,
        acac: acac_from_cells(positive.original, positive.anti, negative.original, negative.anti),
    })
}

fn check_finite(name: &str, xs: &[Real]) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite value in {name} scores")));
    }
    Ok(())
}

/// Area under the ROC curve for separating `shortcut` scores (expected
/// high) from `random` scores (expected low): the Mann–Whitney U statistic
/// over all pairs, ties counted half, divided by `n₁·n₂`.
///
/// Computed via average ranks on the merged sample, so large groups stay
/// `O(n log n)`.
///
/// # Errors
///
/// Returns [`Error::Config`] if either group is empty and
/// [`Error::Numeric`] for non-finite scores.
pub fn auroc(shortcut: &[Real], random: &[Real]) -> Result<Real> {
    if shortcut.is_empty() || random.is_empty() {
        return Err(Error::config("auroc needs two non-empty score groups"));
    }
    check_finite("shortcut", shortcut)?;
    check_finite("random", random)?;
    let n1 = shortcut.len();
    let n2 = random.len();
    let mut merged: Vec<(Real, bool)> = shortcut
        .iter()
        .map(|&s| (s, true))
        .chain(random.iter().map(|&s| (s, false)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_shortcut = 0.0;
    let mut i = 0;
    while i < merged.len() {
        let mut j = i;
        while j < merged.len() && merged[j].0 == merged[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the tie-averaged rank.
        let avg_rank = (i + 1 + j) as Real / 2.0;
        for entry in &merged[i..j] {
            if entry.1 {
                rank_sum_shortcut += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_shortcut - (n1 * (n1 + 1)) as Real / 2.0;
    Ok(u / (n1 as Real * n2 as Real))
}

/// ROC curve for separating `shortcut` (positive) from `random`
/// (negative) scores, as (false-positive rate, true-positive rate)
/// points from threshold `+∞` down through every distinct score.
///
/// Starts at `(0, 0)`, ends at `(1, 1)`, and is monotone in both
/// coordinates; tied scores across groups produce diagonal segments, so
/// the trapezoid area under the curve equals [`auroc`] exactly.
///
/// # Errors
///
/// Same preconditions as [`auroc`].
pub fn roc_points(shortcut: &[Real], random: &[Real]) -> Result<Vec<(Real, Real)>> {
    if shortcut.is_empty() || random.is_empty() {
        return Err(Error::config("roc needs two non-empty score groups"));
    }
    check_finite("shortcut", shortcut)?;
    check_finite("random", random)?;
    let mut merged: Vec<(Real, bool)> = shortcut
        .iter()
        .map(|&s| (s, true))
        .chain(random.iter().map(|&s| (s, false)))
        .collect();
    merged.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (n1, n2) = (shortcut.len() as Real, random.len() as Real);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < merged.len() {
        let mut j = i;
        while j < merged.len() && merged[j].0 == merged[i].0 {
            if merged[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as Real / n2, tp as Real / n1));
        i = j;
    }
    Ok(points)
}

/// Mean and sample standard deviation (n−1 denominator; 0 for a single
/// value).
#[must_use]
pub fn mean_std(xs: &[Real]) -> (Real, Real) {
    let n = xs.len() as Real;
    let mean = xs.iter().sum::<Real>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<Real>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standardized mean difference between the two score groups:
/// `(μ₁ − μ₂) / √((σ₁² + σ₂²)/2)` with sample (n−1) standard deviations.
///
/// # Errors
///
/// Returns [`Error::Config`] if either group has fewer than 2 scores,
/// and [`Error::Numeric`] for non-finite scores or a zero pooled
/// standard deviation (both groups constant).
pub fn cohens_d(shortcut: &[Real], random: &[Real]) -> Result<Real> {
    if shortcut.len() < 2 || random.len() < 2 {
        return Err(Error::config(
            "effect size needs at least 2 scores per group",
        ));
    }
    check_finite("shortcut", shortcut)?;
    check_finite("random", random)?;
    let (m1, s1) = mean_std(shortcut);
    let (m2, s2) = mean_std(random);
    let pooled = ((s1 * s1 + s2 * s2) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::numeric(
            "zero pooled standard deviation: both groups are constant",
        ));
    }
    Ok((m1 - m2) / pooled)
}

/// Detector quality over two score groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvalReport {
    pub n_shortcut: usize,
    pub n_random: usize,
    pub mean_shortcut: Real,
    pub mean_random: Real,
    pub std_shortcut: Real,
    pub std_random: Real,
    /// In `[0, 1]`; 1.0 means every shortcut score exceeds every random
    /// score.
    pub auroc: Real,
    pub cohens_d: Real,
}

/// Compute both detector-quality metrics and the group moments.
///
/// # Errors
///
/// Propagates the preconditions of [`auroc`] and [`cohens_d`].
pub fn detection_eval(shortcut: &[Real], random: &[Real]) -> Result<DetectionEvalReport> {
    let (mean_shortcut, std_shortcut) = mean_std(shortcut);
    let (mean_random, std_random) = mean_std(random);
    Ok(DetectionEvalReport {
        n_shortcut: shortcut.len(),
        n_random: random.len(),
        mean_shortcut,
        mean_random,
        std_shortcut,
        std_random,
        auroc: auroc(shortcut, random)?,
        cohens_d: cohens_d(shortcut, random)?,
    })
}

/// Shannon entropy (natural log) of scores normalized by total absolute
/// mass: `−Σ p_i ln p_i` with `p_i = |s_i| / Σ|s_j|`. Zero-mass terms
/// contribute nothing; an all-zero score vector has entropy 0 by
/// convention. Uniform scores over `N` tokens give `ln N`.
#[must_use]
pub fn entropy_nat(scores: &[Real]) -> Real {
    let total: Real = scores.iter().map(|s| s.abs()).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for s in scores {
        let p = s.abs() / total;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// One scored example, as the character metrics need it: raw per-token
/// scores, the word spans over those tokens, and the per-word aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterInput {
    pub token_scores: Vec<Real>,
    pub spans: Vec<WordSpan>,
    pub word_scores: Vec<Real>,
}

/// Aggregate character of one attribution method over a set of examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionCharacter {
    pub n_examples: usize,
    /// Mean natural-log entropy of normalized per-token scores.
    pub mean_entropy: Real,
    /// Mean 1-based argmax position inside multi-token words; `None` when
    /// no example has a multi-token word.
    pub mean_top_token_position: Option<Real>,
    /// Mean number of sentiment-lexicon words among each example's five
    /// highest-scoring words.
    pub mean_sentiment_hits: Real,
}

/// Summarize score concentration, intra-word peak position, and
/// sentiment-word prevalence in the top-5 words, averaged over examples.
///
/// # Errors
///
/// Returns [`Error::Config`] for an empty input set and [`Error::Shape`]
/// if an example's word scores do not line up with its spans.
pub fn attribution_character(
    inputs: &[CharacterInput],
    lexicon: &Lexicon,
) -> Result<AttributionCharacter> {
    if inputs.is_empty() {
        return Err(Error::config("attribution character needs examples"));
    }
    let mut entropy_sum = 0.0;
    let mut top_positions: Vec<Real> = Vec::new();
    let mut hits_sum = 0.0;
    for (idx, input) in inputs.iter().enumerate() {
        if input.word_scores.len() != input.spans.len() {
            return Err(Error::shape(format!(
                "example {idx}: {} word scores for {} spans",
                input.word_scores.len(),
                input.spans.len()
            )));
        }
        check_finite("token", &input.token_scores)?;
        check_finite("word", &input.word_scores)?;
        entropy_sum += entropy_nat(&input.token_scores);

        for span in &input.spans {
            if span.len < 2 {
                continue;
            }
            if span.start + span.len > input.token_scores.len() {
                return Err(Error::shape(format!(
                    "example {idx}: span {:?} exceeds {} token scores",
                    span.word,
                    input.token_scores.len()
                )));
            }
            let window = &input.token_scores[span.start..span.start + span.len];
            let mut best = 0usize;
            for (k, s) in window.iter().enumerate() {
                if s.abs() > window[best].abs() {
                    best = k;
                }
            }
            top_positions.push((best + 1) as Real);
        }

        let mut order: Vec<usize> = (0..input.word_scores.len()).collect();
        order.sort_by(|&a, &b| {
            input.word_scores[b]
                .total_cmp(&input.word_scores[a])
                .then(a.cmp(&b))
        });
        let hits = order
            .iter()
            .take(5)
            .filter(|&&w| lexicon.contains(&input.spans[w].word))
            .count();
        hits_sum += hits as Real;
    }
    let n = inputs.len() as Real;
    Ok(AttributionCharacter {
        n_examples: inputs.len(),
        mean_entropy: entropy_sum / n,
        mean_top_token_position: if top_positions.is_empty() {
            None
        } else {
            Some(top_positions.iter().sum::<Real>() / top_positions.len() as Real)
        },
        mean_sentiment_hits: hits_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    // ---- ACAC ----

    /// The worked four-cell example: the two per-class drops are 29.79 and
    /// 36.48, so the change is 33.135, displayed as 33.14.
    #[test]
    fn acac_matches_the_worked_cell_example() {
        let acac = acac_from_cells(84.09, 54.30, 69.91, 33.43);
        assert!((acac - 33.135).abs() < 1e-9, "{acac}");
        assert_eq!(format!("{acac:.2}"), "33.14");
    }

    #[test]
    fn acac_of_an_unaffected_classifier_is_zero() {
        assert_eq!(acac_from_cells(91.0, 91.0, 88.5, 88.5), 0.0);
    }

    /// A drop in one class can coexist with a gain in the other; the two
    /// legs enter with opposite signs.
    #[test]
    fn acac_combines_a_drop_and_a_gain() {
        let acac = acac_from_cells(83.1, 63.5, 72.2, 88.8);
        let pos_drop = 83.1 - 63.5; // 19.6 points lost
        let neg_gain = 88.8 - 72.2; // 16.6 points gained
        assert!((acac - 0.5 * (pos_drop - neg_gain)).abs() < 1e-12);
        assert!((acac - 1.5).abs() < 1e-9, "{acac}");
    }

    // ---- AUROC ----

    #[test]
    fn auroc_is_one_for_disjoint_groups_and_half_for_identical() {
        let high = [5.0, 6.0, 7.0];
        let low = [1.0, 2.0, 3.0];
        assert_eq!(auroc(&high, &low).unwrap(), 1.0);
        assert_eq!(auroc(&low, &high).unwrap(), 0.0);
        let same = [1.0, 2.0, 3.0, 4.0];
        assert!((auroc(&same, &same).unwrap() - 0.5).abs() < 1e-15);
    }

    /// Hand-enumerated overlapping case: of the 9 (shortcut, random)
    /// pairs, 6 are strict wins for {2,3,4} over {1,2,3} and 2 are ties,
    /// so U = 6 + 2·½ = 7 and AUROC = 7/9.
    #[test]
    fn auroc_counts_ties_as_half_wins() {
        let got = auroc(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((got - 7.0 / 9.0).abs() < 1e-15, "{got}");
    }

    /// Independent oracle: brute-force comparison of every pair.
    fn auroc_oracle(a: &[Real], b: &[Real]) -> Real {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u / (a.len() as Real * b.len() as Real)
    }

    #[test]
    fn auroc_matches_the_pairwise_oracle_on_random_instances() {
        let mut rng = RngStream::from_seed(404);
        for trial in 0..20 {
            let n1 = 2 + rng.gen_range(30);
            let n2 = 2 + rng.gen_range(30);
            // Quantize so ties actually occur.
            let draw = |rng: &mut RngStream, n: usize| -> Vec<Real> {
                (0..n).map(|_| (rng.gen_range(12) as Real) / 3.0).collect()
            };
            let a = draw(&mut rng, n1);
            let b = draw(&mut rng, n2);
            let got = auroc(&a, &b).unwrap();
            let want = auroc_oracle(&a, &b);
            assert!((got - want).abs() < 1e-12, "trial {trial}: {got} vs {want}");
        }
    }

    #[test]
    fn auroc_is_invariant_under_monotone_transforms_and_flips_on_swap() {
        let mut rng = RngStream::from_seed(99);
        let a: Vec<Real> = (0..25).map(|_| rng.normal() + 0.8).collect();
        let b: Vec<Real> = (0..19).map(|_| rng.normal()).collect();
        let base = auroc(&a, &b).unwrap();
        let warp = |xs: &[Real]| -> Vec<Real> { xs.iter().map(|x| (3.0 * x).exp()).collect() };
        let warped = auroc(&warp(&a), &warp(&b)).unwrap();
        assert!((base - warped).abs() < 1e-12);
        let swapped = auroc(&b, &a).unwrap();
        assert!((base + swapped - 1.0).abs() < 1e-12);
    }

    /// The trapezoid area under the ROC staircase is an independent route
    /// to the same quantity as the rank-based statistic: strict wins are
    /// rectangles, ties are diagonal segments worth half.
    #[test]
    fn roc_trapezoid_area_equals_auroc() {
        let mut rng = RngStream::from_seed(2024);
        for trial in 0..10 {
            let draw = |rng: &mut RngStream, n: usize, shift: Real| -> Vec<Real> {
                (0..n)
                    .map(|_| (rng.gen_range(9) as Real) / 2.0 + shift)
                    .collect()
            };
            let n1 = 3 + rng.gen_range(25);
            let n2 = 3 + rng.gen_range(25);
            let a = draw(&mut rng, n1, 0.5);
            let b = draw(&mut rng, n2, 0.0);
            let points = roc_points(&a, &b).unwrap();
            assert_eq!(points.first(), Some(&(0.0, 0.0)));
            assert_eq!(points.last(), Some(&(1.0, 1.0)));
            for w in points.windows(2) {
                assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1, "non-monotone roc");
            }
            let area: Real = points
                .windows(2)
                .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
                .sum();
            let direct = auroc(&a, &b).unwrap();
            assert!((area - direct).abs() < 1e-12, "trial {trial}: {area} vs {direct}");
        }
    }

    #[test]
    fn auroc_rejects_empty_or_non_finite_groups() {
        assert!(auroc(&[], &[1.0]).is_err());
        assert!(auroc(&[1.0], &[]).is_err());
        assert!(auroc(&[Real::NAN], &[1.0]).is_err());
    }

    // ---- Cohen's d ----

    #[test]
    fn cohens_d_matches_a_direct_formula_oracle() {
        let mut rng = RngStream::from_seed(777);
        for trial in 0..20 {
            let n1 = 2 + rng.gen_range(40);
            let n2 = 2 + rng.gen_range(40);
            let a: Vec<Real> = (0..n1).map(|_| 0.4 * rng.normal() + 1.0).collect();
            let b: Vec<Real> = (0..n2).map(|_| 0.7 * rng.normal()).collect();
            let got = cohens_d(&a, &b).unwrap();

            // Direct recomputation, spelled out.
            let mean = |xs: &[Real]| xs.iter().sum::<Real>() / xs.len() as Real;
            let var = |xs: &[Real]| {
                let m = mean(xs);
                xs.iter().map(|x| (x - m).powi(2)).sum::<Real>() / (xs.len() as Real - 1.0)
            };
            let want = (mean(&a) - mean(&b)) / ((var(&a) + var(&b)) / 2.0).sqrt();
            assert!((got - want).abs() < 1e-12, "trial {trial}: {got} vs {want}");
        }
    }

    #[test]
    fn cohens_d_analytic_case_and_symmetries() {
        // Means 1 and 0, both sample stds exactly 1.
        let a = [0.0, 1.0, 2.0]; // mean 1, var ((1+0+1)/2)=1
        let b = [-1.0, 0.0, 1.0]; // mean 0, var 1
        let d = cohens_d(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
        let flipped = cohens_d(&b, &a).unwrap();
        assert!((d + flipped).abs() < 1e-12);
        // Identical groups: numerator is exactly zero.
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn cohens_d_rejects_degenerate_groups() {
        assert!(cohens_d(&[1.0], &[1.0, 2.0]).is_err());
        assert!(cohens_d(&[3.0, 3.0], &[5.0, 5.0]).is_err());
        assert!(cohens_d(&[1.0, Real::INFINITY], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn detection_eval_bundles_the_metrics_and_moments() {
        let a = [4.0, 5.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let report = detection_eval(&a, &b).unwrap();
        assert_eq!(report.auroc, 1.0);
        assert_eq!(report.n_shortcut, 3);
        assert_eq!(report.n_random, 3);
        assert!((report.mean_shortcut - 5.0).abs() < 1e-15);
        assert!((report.mean_random - 2.0).abs() < 1e-15);
        assert!((report.std_shortcut - 1.0).abs() < 1e-12);
        assert!((report.cohens_d - 3.0).abs() < 1e-12);
    }

    // ---- attribution character ----

    #[test]
    fn entropy_hits_the_uniform_and_spike_endpoints() {
        let uniform = [0.25; 16];
        assert!((entropy_nat(&uniform) - (16.0_f64).ln()).abs() < 1e-12);
        let spike = [0.0, 0.0, 3.5, 0.0];
        assert_eq!(entropy_nat(&spike), 0.0);
        assert_eq!(entropy_nat(&[0.0; 5]), 0.0);
        // Signs are irrelevant: normalization uses absolute mass.
        let signed = [-0.25, 0.25, -0.25, 0.25];
        assert!((entropy_nat(&signed) - (4.0_f64).ln()).abs() < 1e-12);
    }

    fn span(word: &str, start: usize, len: usize) -> WordSpan {
        WordSpan {
            word: word.into(),
            start,
            len,
        }
    }

    #[test]
    fn character_metrics_match_a_hand_built_example() {
        let lex = Lexicon::bundled();
        // Token layout: ["the", "film", "was", "great", "Marcus", "Hale"].
        let inputs = vec![CharacterInput {
            token_scores: vec![0.0, 0.0, 0.0, 0.9, 0.1, 0.7],
            spans: vec![
                span("the", 0, 1),
                span("film", 1, 1),
                span("was", 2, 1),
                span("great", 3, 1),
                span("Marcus Hale", 4, 2),
            ],
            word_scores: vec![0.0, 0.0, 0.0, 0.9, 0.7],
        }];
        let report = attribution_character(&inputs, &lex).unwrap();
        assert_eq!(report.n_examples, 1);
        // The name's argmax is its second token.
        assert_eq!(report.mean_top_token_position, Some(2.0));
        // Top-5 words are all five; only "great" is a sentiment word.
        assert!((report.mean_sentiment_hits - 1.0).abs() < 1e-15);
        assert!(report.mean_entropy > 0.0);
    }

    #[test]
    fn top_position_averages_across_words_and_examples() {
        let lex = Lexicon::bundled();
        let ex = |scores: Vec<Real>, peak_word: &str| CharacterInput {
            token_scores: scores,
            spans: vec![span(peak_word, 0, 3)],
            word_scores: vec![1.0],
        };
        let inputs = vec![
            ex(vec![0.9, 0.1, 0.0], "Anna Maria Lopez"),
            ex(vec![0.0, 0.1, -0.8], "Jean Claude Moreau"),
        ];
        let report = attribution_character(&inputs, &lex).unwrap();
        // Argmax positions 1 and 3 average to 2; ties would take the
        // earlier token.
        assert_eq!(report.mean_top_token_position, Some(2.0));
        let single = vec![CharacterInput {
            token_scores: vec![1.0],
            spans: vec![span("only", 0, 1)],
            word_scores: vec![1.0],
        }];
        let no_multi = attribution_character(&single, &lex).unwrap();
        assert_eq!(no_multi.mean_top_token_position, None);
    }

    #[test]
    fn sentiment_hits_count_lexicon_words_in_the_top_five() {
        let lex = Lexicon::bundled();
        let words = ["terrible", "the", "dull", "plot", "was", "sloppy", "and", "hollow"];
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2];
        let inputs = vec![CharacterInput {
            token_scores: scores.to_vec(),
            spans: words
                .iter()
                .enumerate()
                .map(|(i, w)| span(w, i, 1))
                .collect(),
            word_scores: scores.to_vec(),
        }];
        // Top five: terrible, the, dull, plot, was → 2 lexicon words.
        let report = attribution_character(&inputs, &lex).unwrap();
        assert!((report.mean_sentiment_hits - 2.0).abs() < 1e-15);
    }

    #[test]
    fn character_inputs_are_validated() {
        let lex = Lexicon::bundled();
        assert!(attribution_character(&[], &lex).is_err());
        let bad = vec![CharacterInput {
            token_scores: vec![1.0],
            spans: vec![span("w", 0, 1)],
            word_scores: vec![],
        }];
        assert!(attribution_character(&bad, &lex).is_err());
        let oob = vec![CharacterInput {
            token_scores: vec![1.0],
            spans: vec![span("w w", 0, 2)],
            word_scores: vec![1.0],
        }];
        assert!(attribution_character(&oob, &lex).is_err());
    }

    #[test]
    fn mean_std_uses_the_sample_convention() {
        let (m, s) = mean_std(&[2.0, 4.0, 6.0]);
        assert_eq!(m, 4.0);
        assert!((s - 2.0).abs() < 1e-12);
        let (m1, s1) = mean_std(&[7.0]);
        assert_eq!((m1, s1), (7.0, 0.0));
    }
}
