// SPDX-License-Identifier: MIT OR Apache-2.0

//! Three-pass path patching.
//!
//! Pass 1 runs the clean input and records `LD_ref`; pass 2 runs the donor
//! (corrupt) input and stores every activation; pass 3 reruns the clean
//! input with one component's activation spliced in from the donor run and
//! records `LD_patched`. The reported effect is
//!
//! ```text
//! ΔLD = LD_ref − LD_patched
//! ```
//!
//! so a positive ΔLD means the splice pushed the prediction toward the
//! negative label. Routing controls who sees the splice: `direct` rewrites
//! the component's residual-stream write for everyone downstream, while
//! `via-values` / `via-keys` expose it only to the named receiver heads'
//! value/key computations (their queries and everything else still see the
//! clean stream).
//!
//! Both passes 1 and 2 are shared across targets, so scanning every
//! component costs one donor forward plus one hooked forward per component.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ActivationCache, Hook};
use crate::model::{Component, ModelParams};
use crate::numerics::{Matrix, Real};

use super::final_logit_diff;

/// Which route a patch used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    Direct,
    ViaValues,
    ViaKeys,
}

impl std::fmt::Display for Routing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Routing::Direct => "direct",
            Routing::ViaValues => "via-values",
            Routing::ViaKeys => "via-keys",
        })
    }
}

/// Outcome of one three-pass patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchResult {
    pub target: Component,
    pub routing: Routing,
    /// `LD` of the unpatched clean run.
    pub clean_ld: Real,
    /// `LD` of the clean run with the donor activation spliced in.
    pub patched_ld: Real,
    /// `clean_ld − patched_ld`.
    pub delta_ld: Real,
}

/// A clean/donor input pair with both reference passes cached.
#[derive(Debug)]
pub struct PatchContext<'a> {
    params: &'a ModelParams,
    clean_tokens: Vec<u32>,
    /// Pass-1 cache (clean input).
    pub clean: ActivationCache,
    /// Pass-2 cache (donor input).
    pub donor: ActivationCache,
}

impl<'a> PatchContext<'a> {
    /// Run passes 1 and 2.
    ///
    /// # Errors
    ///
    /// Returns an error if the inputs differ in length (activations would
    /// not be row-aligned) or a forward pass fails.
    pub fn new(params: &'a ModelParams, clean: &[u32], donor: &[u32]) -> Result<Self> {
        if clean.len() != donor.len() {
            return Err(Error::shape(format!(
                "patching needs length-matched inputs, got {} vs {}",
                clean.len(),
                donor.len()
            )));
        }
        Ok(PatchContext {
            params,
            clean_tokens: clean.to_vec(),
            clean: params.forward(clean)?,
            donor: params.forward(donor)?,
        })
    }

    /// `LD` of the clean run.
    ///
    /// # Errors
    ///
    /// Returns an error on an empty sequence.
    pub fn clean_ld(&self) -> Result<Real> {
        final_logit_diff(&self.clean)
    }

    /// `LD` of the donor run.
    ///
    /// # Errors
    ///
    /// Returns an error on an empty sequence.
    pub fn donor_ld(&self) -> Result<Real> {
        final_logit_diff(&self.donor)
    }

    fn run(&self, target: Component, routing: Routing, hooks: Vec<Hook>) -> Result<PatchResult> {
        let patched_cache = self.params.forward_hooked(&self.clean_tokens, &hooks)?;
        let clean_ld = self.clean_ld()?;
        let patched_ld = final_logit_diff(&patched_cache)?;
        Ok(PatchResult {
            target,
            routing,
            clean_ld,
            patched_ld,
            delta_ld: clean_ld - patched_ld,
        })
    }

    /// Pass 3 with a direct splice of `target`'s donor activation.
    ///
    /// # Errors
    ///
    /// Returns an error for an unknown component or a failed forward pass.
    pub fn direct(&self, target: Component) -> Result<PatchResult> {
        let replacement = self.donor.component_out(target)?.clone();
        self.run(target, Routing::Direct, vec![Hook::direct(target, replacement)])
    }

    /// Pass 3 splicing `target`'s donor activation into the receivers'
    /// **value** inputs only.
    ///
    /// # Errors
    ///
    /// Returns an error if the target is not strictly upstream of every
    /// receiver, or on an unknown component.
    pub fn via_values(
        &self,
        target: Component,
        receivers: &[(usize, usize)],
    ) -> Result<PatchResult> {
        let replacement = self.donor.component_out(target)?.clone();
        self.run(
            target,
            Routing::ViaValues,
            vec![Hook::via_values(target, receivers.to_vec(), replacement)],
        )
    }

    /// Pass 3 splicing `target`'s donor activation into the receivers'
    /// **key** inputs only.
    ///
    /// # Errors
    ///
    /// Returns an error if the target is not strictly upstream of every
    /// receiver, or on an unknown component.
    pub fn via_keys(
        &self,
        target: Component,
        receivers: &[(usize, usize)],
    ) -> Result<PatchResult> {
        let replacement = self.donor.component_out(target)?.clone();
        self.run(
            target,
            Routing::ViaKeys,
            vec![Hook::via_keys(target, receivers.to_vec(), replacement)],
        )
    }

    /// Pass 3 with **every** component (embedding, all heads, all MLPs)
    /// spliced from the donor simultaneously; the result must reproduce the
    /// donor run's `LD`.
    ///
    /// # Errors
    ///
    /// Returns an error on a failed forward pass.
    pub fn all_components_direct(&self) -> Result<PatchResult> {
        let cfg = &self.params.config;
        let mut hooks =
            vec![Hook::direct(Component::Embed, self.donor.resid[0].clone())];
        for layer in 0..cfg.n_layers {
            for head in 0..cfg.n_heads {
                let c = Component::Head { layer, head };
                hooks.push(Hook::direct(c, self.donor.component_out(c)?.clone()));
            }
            let c = Component::Mlp { layer };
            hooks.push(Hook::direct(c, self.donor.component_out(c)?.clone()));
        }
        self.run(Component::Embed, Routing::Direct, hooks)
    }
}

/// Direct-patch a component with an arbitrary replacement (zero or mean
/// ablation) instead of a donor run.
///
/// # Errors
///
/// Returns an error on shape mismatch or a failed forward pass.
pub fn direct_patch_with(
    params: &ModelParams,
    tokens: &[u32],
    target: Component,
    replacement: Matrix,
) -> Result<PatchResult> {
    let clean = params.forward(tokens)?;
    let patched = params.forward_hooked(tokens, &[Hook::direct(target, replacement)])?;
    let clean_ld = final_logit_diff(&clean)?;
    let patched_ld = final_logit_diff(&patched)?;
    Ok(PatchResult {
        target,
        routing: Routing::Direct,
        clean_ld,
        patched_ld,
        delta_ld: clean_ld - patched_ld,
    })
}

/// Per-position mean of a component's activation over a set of
/// equal-length inputs (the replacement used by mean ablation).
///
/// # Errors
///
/// Returns an error if `inputs` is empty or lengths differ.
pub fn mean_activation(
    params: &ModelParams,
    inputs: &[Vec<u32>],
    component: Component,
) -> Result<Matrix> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::config("mean_activation needs at least one input"))?;
    let n = first.len();
    if let Some(bad) = inputs.iter().find(|t| t.len() != n) {
        return Err(Error::shape(format!(
            "mean_activation inputs must share a length, got {} vs {n}",
            bad.len()
        )));
    }
    let mut mean = Matrix::zeros(n, params.config.d_resid);
    for tokens in inputs {
        let cache = params.forward(tokens)?;
        mean.add_assign(cache.component_out(component)?)?;
    }
    mean.scale(1.0 / inputs.len() as Real);
    Ok(mean)
}

/// Mean patch effect of one component over a batch of input pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub component: Component,
    pub routing: Routing,
    /// Mean `ΔLD` over the pairs.
    pub mean_delta_ld: Real,
    /// Number of pairs aggregated.
    pub n: usize,
}

fn scan(
    params: &ModelParams,
    pairs: &[(Vec<u32>, Vec<u32>)],
    components: &[Component],
    routing: Routing,
    receivers: Option<&[(usize, usize)]>,
) -> Result<Vec<ScanEntry>> {
    if pairs.is_empty() {
        return Err(Error::config("patch scan needs at least one input pair"));
    }
    // One worker per pair; each returns the per-component deltas in scan
    // order, and the reduction sums in pair order so results do not depend
    // on scheduling.
    let per_pair: Vec<Vec<Real>> = pairs
        .par_iter()
        .map(|(clean, donor)| -> Result<Vec<Real>> {
            let ctx = PatchContext::new(params, clean, donor)?;
            components
                .iter()
                .map(|&c| {
                    let result = match routing {
                        Routing::Direct => ctx.direct(c)?,
                        Routing::ViaValues => ctx.via_values(
                            c,
                            receivers.expect("receivers required for via routing"),
                        )?,
                        Routing::ViaKeys => ctx.via_keys(
                            c,
                            receivers.expect("receivers required for via routing"),
                        )?,
                    };
                    Ok(result.delta_ld)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(components
        .iter()
        .enumerate()
        .map(|(i, &component)| {
            let sum: Real = per_pair.iter().map(|deltas| deltas[i]).sum();
            ScanEntry {
                component,
                routing,
                mean_delta_ld: sum / pairs.len() as Real,
                n: pairs.len(),
            }
        })
        .collect())
}

/// Direct-patch every head and MLP, averaging `ΔLD` over the input pairs.
///
/// # Errors
///
/// Returns an error on empty input, length mismatch, or forward failure.
pub fn scan_direct(
    params: &ModelParams,
    pairs: &[(Vec<u32>, Vec<u32>)],
) -> Result<Vec<ScanEntry>> {
    let components = Component::scan_set(&params.config);
    scan(params, pairs, &components, Routing::Direct, None)
}

/// Patch every head and MLP strictly upstream of all `receivers` into the
/// receivers' value inputs, averaging `ΔLD` over the input pairs.
///
/// # Errors
///
/// Returns an error if `receivers` is empty, no component lies upstream of
/// them, or a pass fails.
pub fn scan_via_values(
    params: &ModelParams,
    pairs: &[(Vec<u32>, Vec<u32>)],
    receivers: &[(usize, usize)],
) -> Result<Vec<ScanEntry>> {
    let min_layer = receivers
        .iter()
        .map(|&(l, _)| l)
        .min()
        .ok_or_else(|| Error::config("via-values scan needs at least one receiver"))?;
    let components: Vec<Component> = Component::scan_set(&params.config)
        .into_iter()
        .filter(|c| c.layer().is_some_and(|l| l < min_layer))
        .collect();
    if components.is_empty() {
        return Err(Error::config(format!(
            "no components upstream of receivers (min receiver layer {min_layer})"
        )));
    }
    scan(params, pairs, &components, Routing::ViaValues, Some(receivers))
}

/// Patch every head and MLP strictly upstream of all `receivers` into the
/// receivers' key/query inputs, averaging `ΔLD` over the input pairs.
///
/// # Errors
///
/// Returns an error if `receivers` is empty, no component lies upstream of
/// them, or a pass fails.
pub fn scan_via_keys(
    params: &ModelParams,
    pairs: &[(Vec<u32>, Vec<u32>)],
    receivers: &[(usize, usize)],
) -> Result<Vec<ScanEntry>> {
    let min_layer = receivers
        .iter()
        .map(|&(l, _)| l)
        .min()
        .ok_or_else(|| Error::config("via-keys scan needs at least one receiver"))?;
    let components: Vec<Component> = Component::scan_set(&params.config)
        .into_iter()
        .filter(|c| c.layer().is_some_and(|l| l < min_layer))
        .collect();
    if components.is_empty() {
        return Err(Error::config(format!(
            "no components upstream of receivers (min receiver layer {min_layer})"
        )));
    }
    scan(params, pairs, &components, Routing::ViaKeys, Some(receivers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::RngStream;

    fn micro_model(seed: u64) -> ModelParams {
        let mut rng = RngStream::from_seed(seed);
        ModelParams::init(ModelConfig::micro(29), &mut rng).unwrap()
    }

    fn tokens(seed: u64, n: usize) -> Vec<u32> {
        let mut rng = RngStream::from_seed(seed);
        (0..n).map(|_| rng.gen_range(29) as u32).collect()
    }

    #[test]
    fn identity_patch_is_exactly_zero_for_every_component_and_route() {
        let params = micro_model(41);
        let toks = tokens(42, 10);
        let ctx = PatchContext::new(&params, &toks, &toks).unwrap();
        let receivers: Vec<(usize, usize)> = (0..params.config.n_heads)
            .map(|h| (params.config.n_layers - 1, h))
            .collect();
        for c in Component::scan_set(&params.config) {
            let direct = ctx.direct(c).unwrap();
            assert_eq!(direct.delta_ld, 0.0, "direct identity patch of {c:?}");
            if c.layer().is_some_and(|l| l < params.config.n_layers - 1) {
                let via = ctx.via_values(c, &receivers).unwrap();
                assert_eq!(via.delta_ld, 0.0, "via-values identity patch of {c:?}");
                let keys = ctx.via_keys(c, &receivers).unwrap();
                assert_eq!(keys.delta_ld, 0.0, "via-keys identity patch of {c:?}");
            }
        }
        let embed = ctx.direct(Component::Embed).unwrap();
        assert_eq!(embed.delta_ld, 0.0);
    }

    #[test]
    fn patching_every_component_reproduces_the_donor_ld() {
        let params = micro_model(43);
        let clean = tokens(44, 12);
        let donor = tokens(45, 12);
        let ctx = PatchContext::new(&params, &clean, &donor).unwrap();
        let all = ctx.all_components_direct().unwrap();
        let donor_ld = ctx.donor_ld().unwrap();
        assert!(
            (all.patched_ld - donor_ld).abs() <= 1e-9,
            "full patch drifted: {} vs {donor_ld}",
            all.patched_ld
        );
        // And the donor genuinely differs from the clean run.
        assert!((ctx.clean_ld().unwrap() - donor_ld).abs() > 1e-12);
    }

    #[test]
    fn direct_patch_of_a_live_component_moves_the_ld() {
        let params = micro_model(46);
        let clean = tokens(47, 9);
        let donor = tokens(48, 9);
        let ctx = PatchContext::new(&params, &clean, &donor).unwrap();
        let result = ctx.direct(Component::Embed).unwrap();
        assert!(result.delta_ld != 0.0);
        assert!((result.delta_ld - (result.clean_ld - result.patched_ld)).abs() == 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let params = micro_model(49);
        let err = PatchContext::new(&params, &tokens(50, 8), &tokens(51, 9)).unwrap_err();
        assert!(err.to_string().contains("length"));
    }

    /// When the receiver's attention weight on the patched positions is
    /// (numerically) zero, a via-values splice must not change the logits.
    /// The model is constructed so the key at position 1 repels every
    /// query: queries read coordinates 8..16 (all 0.5), keys read
    /// coordinates 0..8, and position 1's embedding puts −40 there.
    #[test]
    fn via_values_is_inert_where_receiver_attention_is_zero() {
        let mut params = micro_model(52);
        let (d_resid, d_head) = (params.config.d_resid, params.config.d_head);
        params.w_pos = Matrix::zeros(params.config.max_seq, d_resid);
        for t in 0..params.config.vocab_size {
            let value = if t == 5 { -40.0 } else { 0.5 };
            for k in 0..d_resid {
                let x = if k < d_head { value } else { 0.5 };
                params.w_embed.set(t, k, x);
            }
        }
        let head = &mut params.layers[0].heads[0];
        head.w_q = Matrix::zeros(d_resid, d_head);
        head.w_k = Matrix::zeros(d_resid, d_head);
        for d in 0..d_head {
            head.w_q.set(d_head + d, d, 1.0);
            head.w_k.set(d, d, 1.0);
        }
        let toks = vec![1u32, 5, 2, 3];
        let clean = params.forward(&toks).unwrap();
        // Verify the construction: no query row puts weight on position 1.
        let attn = &clean.attn[0][0];
        for q in 1..toks.len() {
            assert!(attn.get(q, 1) < 1e-12, "A[{q},1] = {}", attn.get(q, 1));
        }
        let mut replacement = clean.resid[0].clone();
        for k in 0..d_resid {
            replacement.set(1, k, replacement.get(1, k) + 10.0);
        }
        let mut hook = crate::model::Hook::via_values(
            Component::Embed,
            vec![(0, 0)],
            replacement,
        );
        hook.positions = vec![1];
        let patched = params.forward_hooked(&toks, &[hook]).unwrap();
        let mut max_diff: Real = 0.0;
        for t in 0..toks.len() {
            for v in 0..params.config.vocab_size {
                max_diff = max_diff.max((patched.logits.get(t, v) - clean.logits.get(t, v)).abs());
            }
        }
        assert!(max_diff <= 1e-9, "logits moved by {max_diff}");
    }

    #[test]
    fn scans_cover_the_component_set_and_average_over_pairs() {
        let params = micro_model(53);
        let pairs = vec![
            (tokens(54, 8), tokens(55, 8)),
            (tokens(56, 8), tokens(57, 8)),
        ];
        let entries = scan_direct(&params, &pairs).unwrap();
        let expect = params.config.n_layers * (params.config.n_heads + 1);
        assert_eq!(entries.len(), expect);
        // Cross-check one component against per-pair contexts.
        let c = Component::Mlp { layer: 0 };
        let by_hand: Real = pairs
            .iter()
            .map(|(a, b)| {
                PatchContext::new(&params, a, b)
                    .unwrap()
                    .direct(c)
                    .unwrap()
                    .delta_ld
            })
            .sum::<Real>()
            / pairs.len() as Real;
        let entry = entries.iter().find(|e| e.component == c).unwrap();
        assert!((entry.mean_delta_ld - by_hand).abs() < 1e-15);
        assert_eq!(entry.n, 2);

        let receivers = vec![(1, 0), (1, 1)];
        let via = scan_via_values(&params, &pairs, &receivers).unwrap();
        // Upstream of layer 1: layer-0 heads and MLP 0.
        assert_eq!(via.len(), params.config.n_heads + 1);
        assert!(via.iter().all(|e| e.routing == Routing::ViaValues));
        assert!(via
            .iter()
            .all(|e| e.component.layer() == Some(0)));

        let keys = scan_via_keys(&params, &pairs, &receivers).unwrap();
        assert_eq!(keys.len(), params.config.n_heads + 1);
        assert!(keys.iter().all(|e| e.routing == Routing::ViaKeys));
        let c0 = Component::Head { layer: 0, head: 0 };
        let by_hand: Real = pairs
            .iter()
            .map(|(a, b)| {
                PatchContext::new(&params, a, b)
                    .unwrap()
                    .via_keys(c0, &receivers)
                    .unwrap()
                    .delta_ld
            })
            .sum::<Real>()
            / pairs.len() as Real;
        let entry = keys.iter().find(|e| e.component == c0).unwrap();
        assert!((entry.mean_delta_ld - by_hand).abs() < 1e-15);
        // The two via routes measure different paths, so on random inputs
        // they should not coincide for every component.
        assert!(via
            .iter()
            .zip(&keys)
            .any(|(v, k)| (v.mean_delta_ld - k.mean_delta_ld).abs() > 1e-12));
    }

    #[test]
    fn mean_activation_is_the_per_position_average() {
        let params = micro_model(58);
        let inputs = vec![tokens(59, 7), tokens(60, 7), tokens(61, 7)];
        let c = Component::Mlp { layer: 1 };
        let mean = mean_activation(&params, &inputs, c).unwrap();
        let caches: Vec<_> = inputs.iter().map(|t| params.forward(t).unwrap()).collect();
        for row in 0..7 {
            for col in 0..params.config.d_resid {
                let avg: Real = caches
                    .iter()
                    .map(|cache| cache.component_out(c).unwrap().get(row, col))
                    .sum::<Real>()
                    / 3.0;
                assert!((mean.get(row, col) - avg).abs() < 1e-15);
            }
        }
        // Mean-ablation patch runs end to end.
        let result = direct_patch_with(&params, &inputs[0], c, mean).unwrap();
        assert!(result.delta_ld.is_finite());
        let err = mean_activation(&params, &[], c).unwrap_err();
        assert!(err.to_string().contains("at least one"));
    }
}
