// SPDX-License-Identifier: MIT OR Apache-2.0

//! Circuit faithfulness: does a small set of edges carry the shortcut?
//!
//! A candidate circuit names **label heads** (the heads that write the
//! decision) and **upstream components** (what their value inputs read,
//! typically early MLPs). The protocol runs each test review in three
//! conditions:
//!
//! 1. **random** — the review with its original random actor;
//! 2. **shortcut** — the same review with the anti-correlated shortcut
//!    actor substituted (the condition that drags accuracy down);
//! 3. **random-patched** — the random-actor review, but with the circuit's
//!    edges replayed from the shortcut run: each upstream component's
//!    contribution to the label heads' **value inputs** is swapped to its
//!    shortcut-run activation (attention stays clean), and the label heads'
//!    resulting output change reaches **only the unembedding** — exactly
//!    the two edges the circuit claims, nothing else.
//!
//! If the circuit is faithful, condition 3 reproduces most of the accuracy
//! shift between conditions 1 and 2, in both classes. The patched pass is
//! computed post-hoc from the two cached runs — the edge replay is linear
//! algebra on stored activations, so no third forward pass is needed.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Label, Tokenizer, Triplet, Variant};
use crate::error::{Error, Result};
use crate::model::ActivationCache;
use crate::model::{Component, ModelParams};
use crate::numerics::{Matrix, Real};

use super::{final_logit_diff, logit_diff_vec};

/// A candidate circuit: which heads carry the label, and which upstream
/// components feed their value inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    /// `(layer, head)` pairs. Must be non-empty.
    pub label_heads: Vec<(usize, usize)>,
    /// Components whose contribution to the label heads' value inputs is
    /// replayed from the shortcut run. A component only affects label heads
    /// strictly above it; the embedding is upstream of everything. May be
    /// empty (the patched condition then equals the random condition).
    pub upstream: Vec<Component>,
}

impl CircuitSpec {
    /// Check every referenced component against the architecture.
    ///
    /// # Errors
    ///
    /// Returns an error for an empty head set or out-of-range references.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.label_heads.is_empty() {
            return Err(Error::config("circuit needs at least one label head"));
        }
        let cfg = &params.config;
        for &(l, h) in &self.label_heads {
            if l >= cfg.n_layers || h >= cfg.n_heads {
                return Err(Error::NotFound(format!("label head {l}.{h}")));
            }
        }
        for c in &self.upstream {
            match *c {
                Component::Embed => {}
                Component::Head { layer, head } => {
                    if layer >= cfg.n_layers || head >= cfg.n_heads {
                        return Err(Error::NotFound(format!("upstream head {layer}.{head}")));
                    }
                }
                Component::Mlp { layer } => {
                    if layer >= cfg.n_layers {
                        return Err(Error::NotFound(format!("upstream mlp{layer}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Accuracy of one class under the three conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracies {
    pub n: usize,
    pub random: Real,
    pub shortcut: Real,
    pub random_patched: Real,
}

impl ClassAccuracies {
    /// Fraction of the random→shortcut accuracy shift reproduced by the
    /// patched condition; `None` when the shift is zero or negative.
    #[must_use]
    pub fn reconstructed_fraction(&self) -> Option<Real> {
        let full = self.random - self.shortcut;
        if full > 0.0 {
            Some((self.random - self.random_patched) / full)
        } else {
            None
        }
    }
}

/// Output of [`faithfulness_patch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub positive: ClassAccuracies,
    pub negative: ClassAccuracies,
}

/// The label heads' output change at the final position when their value
/// inputs replay the upstream components from the shortcut run, mapped
/// straight to a logit-difference delta.
fn circuit_ld_delta(
    params: &ModelParams,
    circuit: &CircuitSpec,
    clean: &ActivationCache,
    donor: &ActivationCache,
) -> Result<Real> {
    let t = clean.seq_len() - 1;
    let d_resid = params.config.d_resid;
    let d_head = params.config.d_head;

    // Per layer: the summed swap the circuit applies to that layer's input
    // as seen by value computations (donor minus clean, upstream only).
    let mut swaps: HashMap<usize, Option<Matrix>> = HashMap::new();
    for &(layer, _) in &circuit.label_heads {
        swaps.entry(layer).or_insert_with(|| {
            let applicable: Vec<Component> = circuit
                .upstream
                .iter()
                .copied()
                // The embedding (layer() == None) is upstream of everything.
                .filter(|c| c.layer().is_none_or(|lc| lc < layer))
                .collect();
            if applicable.is_empty() {
                return None;
            }
            let mut d = Matrix::zeros(clean.seq_len(), d_resid);
            for c in applicable {
                // Unwraps are safe: validate() checked membership.
                let donor_out = donor.component_out(c).expect("validated component");
                let clean_out = clean.component_out(c).expect("validated component");
                for row in 0..clean.seq_len() {
                    for col in 0..d_resid {
                        let v =
                            d.get(row, col) + donor_out.get(row, col) - clean_out.get(row, col);
                        d.set(row, col, v);
                    }
                }
            }
            Some(d)
        });
    }

    let mut delta_out = vec![0.0; d_resid];
    for &(layer, head) in &circuit.label_heads {
        let x = &clean.resid[layer];
        let hp = &params.layers[layer].heads[head];
        let attn = &clean.attn[layer][head];
        let swap = swaps.get(&layer).and_then(|s| s.as_ref());

        // Recompute v at every position with the swapped input, keep the
        // clean attention row, and push through w_o. With no swap this
        // reproduces the cached output bit for bit.
        let mut mixed = vec![0.0; d_head];
        for j in 0..=t {
            let a = attn.get(t, j);
            for (dh, m) in mixed.iter_mut().enumerate() {
                let mut vj = 0.0;
                match swap {
                    Some(s) => {
                        for k in 0..d_resid {
                            vj += (x.get(j, k) + s.get(j, k)) * hp.w_v.get(k, dh);
                        }
                    }
                    None => {
                        for k in 0..d_resid {
                            vj += x.get(j, k) * hp.w_v.get(k, dh);
                        }
                    }
                }
                *m += a * vj;
            }
        }
        let cached = clean.head_out[layer][head].row(t);
        for col in 0..d_resid {
            let mut out = 0.0;
            for (dh, m) in mixed.iter().enumerate() {
                out += m * hp.w_o.get(dh, col);
            }
            delta_out[col] += out - cached[col];
        }
    }
    logit_diff_vec(params, &delta_out)
}

/// Run the three-condition faithfulness protocol over triplets.
///
/// The shortcut condition substitutes the **anti-correlated** actor: the
/// bad actor into positive reviews, the good actor into negative ones.
///
/// # Errors
///
/// Returns an error on an invalid circuit, tokenization failure, or a
/// failed forward pass.
pub fn faithfulness_patch(
    params: &ModelParams,
    circuit: &CircuitSpec,
    triplets: &[Triplet],
    tok: &Tokenizer,
) -> Result<FaithfulnessReport> {
    circuit.validate(params)?;
    if triplets.is_empty() {
        return Err(Error::config("faithfulness needs at least one triplet"));
    }

    // (label, correct_random, correct_shortcut, correct_patched) per triplet.
    let rows: Vec<(Label, bool, bool, bool)> = triplets
        .par_iter()
        .map(|trip| -> Result<(Label, bool, bool, bool)> {
            let anti = match trip.label {
                Label::Positive => Variant::Bad,
                Label::Negative => Variant::Good,
            };
            let wrap = |text: &str| -> Result<Vec<u32>> {
                tok.encode_strict(&crate::data::prompt::wrap_review(text))
            };
            let clean_tokens = wrap(trip.text(Variant::Original))?;
            let donor_tokens = wrap(trip.text(anti))?;
            let clean = params.forward(&clean_tokens)?;
            let donor = params.forward(&donor_tokens)?;
            let ld_random = final_logit_diff(&clean)?;
            let ld_shortcut = final_logit_diff(&donor)?;
            let ld_patched = ld_random + circuit_ld_delta(params, circuit, &clean, &donor)?;
            let want = trip.label.is_positive();
            Ok((
                trip.label,
                (ld_random >= 0.0) == want,
                (ld_shortcut >= 0.0) == want,
                (ld_patched >= 0.0) == want,
            ))
        })
        .collect::<Result<_>>()?;

    type Row = (Label, bool, bool, bool);
    let summarize = |label: Label| -> ClassAccuracies {
        let class: Vec<_> = rows.iter().filter(|r| r.0 == label).collect();
        let n = class.len();
        let frac = |f: &dyn Fn(&Row) -> bool| -> Real {
            if n == 0 {
                return 0.0;
            }
            class.iter().filter(|r| f(r)).count() as Real / n as Real * 100.0
        };
        ClassAccuracies {
            n,
            random: frac(&|r| r.1),
            shortcut: frac(&|r| r.2),
            random_patched: frac(&|r| r.3),
        }
    };

    Ok(FaithfulnessReport {
        positive: summarize(Label::Positive),
        negative: summarize(Label::Negative),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_test_triplets, generate, CorpusSpec};
    use crate::model::ModelConfig;
    use crate::numerics::RngStream;

    fn fixture() -> (ModelParams, Vec<Triplet>, Tokenizer) {
        let tok = Tokenizer::lab_vocab();
        let mut spec = CorpusSpec::lab_default(5, 0.0);
        spec.n_train = 10;
        spec.n_val = 2;
        spec.n_test = 20;
        let corpus = generate(&spec).unwrap();
        let triplets = build_test_triplets(&corpus).unwrap();
        let mut rng = RngStream::from_seed(99);
        let mut config = ModelConfig::micro(tok.vocab_size());
        config.max_seq = 128;
        let params = ModelParams::init(config, &mut rng).unwrap();
        (params, triplets, tok)
    }

    #[test]
    fn empty_upstream_patched_condition_equals_random_exactly() {
        let (params, triplets, tok) = fixture();
        let circuit = CircuitSpec {
            label_heads: vec![(1, 0), (1, 1)],
            upstream: vec![],
        };
        let report = faithfulness_patch(&params, &circuit, &triplets, &tok).unwrap();
        assert_eq!(report.positive.random, report.positive.random_patched);
        assert_eq!(report.negative.random, report.negative.random_patched);
        // The recomputation itself must be bitwise: check the delta directly.
        let toks = tok
            .encode_strict(&crate::data::prompt::wrap_review(&triplets[0].original))
            .unwrap();
        let donor_toks = tok
            .encode_strict(&crate::data::prompt::wrap_review(&triplets[0].bad))
            .unwrap();
        let clean = params.forward(&toks).unwrap();
        let donor = params.forward(&donor_toks).unwrap();
        let delta = circuit_ld_delta(&params, &circuit, &clean, &donor).unwrap();
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn full_upstream_swap_moves_the_patched_condition() {
        let (params, triplets, tok) = fixture();
        let circuit = CircuitSpec {
            label_heads: vec![(1, 0), (1, 1)],
            upstream: vec![
                Component::Embed,
                Component::Mlp { layer: 0 },
                Component::Head { layer: 0, head: 0 },
                Component::Head { layer: 0, head: 1 },
            ],
        };
        let trip = &triplets[0];
        let clean = params
            .forward(&tok.encode_strict(&crate::data::prompt::wrap_review(&trip.original)).unwrap())
            .unwrap();
        let donor = params
            .forward(&tok.encode_strict(&crate::data::prompt::wrap_review(&trip.bad)).unwrap())
            .unwrap();
        let delta = circuit_ld_delta(&params, &circuit, &clean, &donor).unwrap();
        assert!(delta.is_finite());
        assert!(delta != 0.0, "swapping every upstream input should move LD");
    }

    #[test]
    fn report_accuracies_are_percentages_with_counts() {
        let (params, triplets, tok) = fixture();
        let circuit = CircuitSpec {
            label_heads: vec![(1, 1)],
            upstream: vec![Component::Mlp { layer: 0 }],
        };
        let report = faithfulness_patch(&params, &circuit, &triplets, &tok).unwrap();
        for class in [&report.positive, &report.negative] {
            assert_eq!(class.n, triplets.len() / 2);
            for acc in [class.random, class.shortcut, class.random_patched] {
                assert!((0.0..=100.0).contains(&acc));
            }
        }
    }

    #[test]
    fn invalid_circuits_are_rejected() {
        let (params, triplets, tok) = fixture();
        let empty = CircuitSpec {
            label_heads: vec![],
            upstream: vec![],
        };
        assert!(faithfulness_patch(&params, &empty, &triplets, &tok).is_err());
        let bad_head = CircuitSpec {
            label_heads: vec![(9, 9)],
            upstream: vec![],
        };
        assert!(faithfulness_patch(&params, &bad_head, &triplets, &tok).is_err());
        let bad_upstream = CircuitSpec {
            label_heads: vec![(1, 0)],
            upstream: vec![Component::Mlp { layer: 42 }],
        };
        assert!(faithfulness_patch(&params, &bad_upstream, &triplets, &tok).is_err());
    }

    #[test]
    fn reconstructed_fraction_guards_nonpositive_shifts() {
        let acc = ClassAccuracies {
            n: 10,
            random: 80.0,
            shortcut: 40.0,
            random_patched: 60.0,
        };
        assert!((acc.reconstructed_fraction().unwrap() - 0.5).abs() < 1e-12);
        let flat = ClassAccuracies {
            n: 10,
            random: 80.0,
            shortcut: 80.0,
            random_patched: 70.0,
        };
        assert!(flat.reconstructed_fraction().is_none());
    }
}
