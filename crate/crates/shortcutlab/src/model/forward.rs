// SPDX-License-Identifier: MIT OR Apache-2.0

//! The cached, hookable forward pass.
//!
//! One function does all the inference work in this crate:
//! [`ModelParams::forward_hooked`]. It records every intermediate the
//! analysis modules need (residual snapshots, per-head outputs and attention
//! patterns, MLP outputs, logits) and optionally splices stored activations
//! into the computation through [`Hook`]s.
//!
//! ## Hook semantics
//!
//! A hook names a *target* component, a set of sequence positions, and a
//! replacement activation (shaped like the component's full output). The
//! route decides who sees the replacement:
//!
//! * [`HookRoute::Direct`] — the component's output rows at the hooked
//!   positions are overwritten before being added to the residual stream.
//!   Everything downstream sees the change.
//! * [`HookRoute::ViaValues`] — the component's output is left alone; only
//!   the listed *receiver* heads see the replacement, and only when reading
//!   their value inputs. Implemented by handing the receiver a value input
//!   of `x + (replacement - actual_output)` at the hooked positions, i.e.
//!   a residual stream in which exactly this component's contribution has
//!   been swapped. Receivers' own outputs then propagate normally, so the
//!   measured effect is "what flows through these heads' value channel".
//! * [`HookRoute::ViaKeys`] — same, but for the receivers' key inputs
//!   (queries are never touched).
//!
//! The cache returned by a hooked run records the activations of *that* run:
//! directly patched outputs appear patched; via-patched receivers show their
//! modified outputs; the patched residual stream is the one the logits were
//! computed from.

use crate::error::{Error, Result};
use crate::model::{Component, ModelParams};
use crate::numerics::{masked_row_softmax, Matrix, Real};

/// How a patched activation is routed into the computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookRoute {
    /// Overwrite the component's residual-stream write.
    Direct,
    /// Expose the replacement only to the listed heads' value computation.
    ViaValues { receivers: Vec<(usize, usize)> },
    /// Expose the replacement only to the listed heads' key computation.
    ViaKeys { receivers: Vec<(usize, usize)> },
}

/// A single activation splice.
#[derive(Debug, Clone)]
pub struct Hook {
    /// Which component's activation is being replaced.
    pub target: Component,
    /// Who sees the replacement.
    pub route: HookRoute,
    /// Sequence positions to replace (row indices into the activation).
    pub positions: Vec<usize>,
    /// Replacement activation, shaped `seq_len x d_resid` like the
    /// component's output; only the rows named in `positions` are read.
    pub replacement: Matrix,
}

impl Hook {
    /// Direct patch of a component at every position.
    #[must_use]
    pub fn direct(target: Component, replacement: Matrix) -> Self {
        let positions = (0..replacement.rows()).collect();
        Hook {
            target,
            route: HookRoute::Direct,
            positions,
            replacement,
        }
    }

    /// Value-side path patch of a component at every position.
    #[must_use]
    pub fn via_values(target: Component, receivers: Vec<(usize, usize)>, replacement: Matrix) -> Self {
        let positions = (0..replacement.rows()).collect();
        Hook {
            target,
            route: HookRoute::ViaValues { receivers },
            positions,
            replacement,
        }
    }

    /// Key-side path patch of a component at every position.
    #[must_use]
    pub fn via_keys(target: Component, receivers: Vec<(usize, usize)>, replacement: Matrix) -> Self {
        let positions = (0..replacement.rows()).collect();
        Hook {
            target,
            route: HookRoute::ViaKeys { receivers },
            positions,
            replacement,
        }
    }
}

/// Everything a forward pass computed.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    /// Residual stream snapshots: `resid[0]` is the embedding output `x^0`,
    /// `resid[l+1] = resid[l] + sum_h head_out[l][h] + mlp_out[l]`.
    pub resid: Vec<Matrix>,
    /// Per-layer, per-head output written to the residual stream
    /// (`seq_len x d_resid`, after `w_o` and after any direct hook).
    pub head_out: Vec<Vec<Matrix>>,
    /// Per-layer, per-head attention patterns (`seq_len x seq_len`,
    /// causal rows summing to 1).
    pub attn: Vec<Vec<Matrix>>,
    /// Per-layer MLP output (after any direct hook).
    pub mlp_out: Vec<Matrix>,
    /// Final logits, `seq_len x vocab_size`.
    pub logits: Matrix,
}

impl ActivationCache {
    /// Sequence length of the cached run.
    #[must_use]
    pub fn seq_len(&self) -> usize {
        self.resid[0].rows()
    }

    /// This run's output of a component (the embedding's "output" is `x^0`).
    ///
    /// # Errors
    ///
    /// Returns [`Error::NotFound`] for out-of-range components.
    pub fn component_out(&self, c: Component) -> Result<&Matrix> {
        match c {
            Component::Embed => Ok(&self.resid[0]),
            Component::Head { layer, head } => self
                .head_out
                .get(layer)
                .and_then(|l| l.get(head))
                .ok_or_else(|| Error::NotFound(format!("head {layer}.{head}"))),
            Component::Mlp { layer } => self
                .mlp_out
                .get(layer)
                .ok_or_else(|| Error::NotFound(format!("mlp{layer}"))),
        }
    }
}

/// Replace `x`'s rows at `positions` by swapping one component's
/// contribution: `row += replacement_row - actual_row`. Rows where the
/// replacement equals the actual output bit-for-bit are skipped so identity
/// patches stay exact.
fn swap_contribution(x: &mut Matrix, actual: &Matrix, hook: &Hook) {
    for &p in &hook.positions {
        if hook.replacement.row(p) == actual.row(p) {
            continue;
        }
        let repl = hook.replacement.row(p);
        let act = actual.row(p);
        let row = x.row_mut(p);
        for (dst, (r, a)) in row.iter_mut().zip(repl.iter().zip(act.iter())) {
            *dst += r - a;
        }
    }
}

fn overwrite_rows(out: &mut Matrix, hook: &Hook) {
    for &p in &hook.positions {
        let repl = hook.replacement.row(p).to_vec();
        out.row_mut(p).copy_from_slice(&repl);
    }
}

impl ModelParams {
    /// Plain cached forward pass (no hooks).
    ///
    /// # Errors
    ///
    /// Propagates tokenization/shape errors from [`ModelParams::embed`].
    pub fn forward(&self, tokens: &[u32]) -> Result<ActivationCache> {
        self.forward_hooked(tokens, &[])
    }

    /// Cached forward pass with activation hooks. See the module docs for
    /// the routing semantics.
    ///
    /// # Errors
    ///
    /// Returns an error if any hook names a missing component or receiver,
    /// uses out-of-range positions, carries a wrongly shaped replacement,
    /// targets a component that is not strictly upstream of one of its
    /// receivers, or if the prompt itself is invalid.
    pub fn forward_hooked(&self, tokens: &[u32], hooks: &[Hook]) -> Result<ActivationCache> {
        let n = tokens.len();
        let cfg = &self.config;
        self.validate_hooks(hooks, n)?;

        let mut x = self.embed(tokens)?;
        for hook in hooks {
            if hook.target == Component::Embed && hook.route == HookRoute::Direct {
                overwrite_rows(&mut x, hook);
            }
        }

        let mut cache = ActivationCache {
            resid: Vec::with_capacity(cfg.n_layers + 1),
            head_out: Vec::with_capacity(cfg.n_layers),
            attn: Vec::with_capacity(cfg.n_layers),
            mlp_out: Vec::with_capacity(cfg.n_layers),
            logits: Matrix::zeros(0, 0),
        };
        cache.resid.push(x);

        let scale = 1.0 / (cfg.d_head as Real).sqrt();
        for l in 0..cfg.n_layers {
            let x = cache.resid[l].clone();
            let mut layer_heads = Vec::with_capacity(cfg.n_heads);
            let mut layer_attn = Vec::with_capacity(cfg.n_heads);
            for h in 0..cfg.n_heads {
                // Value/key inputs may carry via-routed swaps for this head.
                let v_in = self.routed_input(&x, &cache, hooks, (l, h), false)?;
                let k_in = self.routed_input(&x, &cache, hooks, (l, h), true)?;
                let head = &self.layers[l].heads[h];
                let q = x.matmul(&head.w_q)?;
                let k = k_in.as_ref().unwrap_or(&x).matmul(&head.w_k)?;
                let v = v_in.as_ref().unwrap_or(&x).matmul(&head.w_v)?;
                let mut scores = q.matmul(&k.transpose())?;
                scores.scale(scale);
                let attn = masked_row_softmax(&scores, true)?;
                let mut out = attn.matmul(&v)?.matmul(&head.w_o)?;
                for hook in hooks {
                    if hook.target == (Component::Head { layer: l, head: h })
                        && hook.route == HookRoute::Direct
                    {
                        overwrite_rows(&mut out, hook);
                    }
                }
                layer_heads.push(out);
                layer_attn.push(attn);
            }

            let mut x_mid = x;
            for out in &layer_heads {
                x_mid.add_assign(out)?;
            }

            let h_pre = x_mid.matmul(&self.layers[l].w_in)?;
            let h_act = h_pre.map(super::gelu);
            let mut mlp = h_act.matmul(&self.layers[l].w_out)?;
            for hook in hooks {
                if hook.target == (Component::Mlp { layer: l }) && hook.route == HookRoute::Direct {
                    overwrite_rows(&mut mlp, hook);
                }
            }

            let next = x_mid.add(&mlp)?;
            cache.head_out.push(layer_heads);
            cache.attn.push(layer_attn);
            cache.mlp_out.push(mlp);
            cache.resid.push(next);
        }

        cache.logits = cache.resid[cfg.n_layers].matmul(&self.w_unembed)?;
        Ok(cache)
    }

    /// Build the (possibly swapped) residual input for head `(l, h)`'s value
    /// or key computation. Returns `None` when no hook routes to this head
    /// on this side, so the caller can use the unmodified stream without a
    /// copy.
    fn routed_input(
        &self,
        x: &Matrix,
        cache: &ActivationCache,
        hooks: &[Hook],
        receiver: (usize, usize),
        key_side: bool,
    ) -> Result<Option<Matrix>> {
        let mut adjusted: Option<Matrix> = None;
        for hook in hooks {
            let receivers = match (&hook.route, key_side) {
                (HookRoute::ViaValues { receivers }, false)
                | (HookRoute::ViaKeys { receivers }, true) => receivers,
                _ => continue,
            };
            if !receivers.contains(&receiver) {
                continue;
            }
            let actual = cache.component_out(hook.target)?;
            let target = adjusted.get_or_insert_with(|| x.clone());
            swap_contribution(target, actual, hook);
        }
        Ok(adjusted)
    }

    fn validate_hooks(&self, hooks: &[Hook], n: usize) -> Result<()> {
        let cfg = &self.config;
        for hook in hooks {
            match hook.target {
                Component::Embed => {}
                Component::Head { layer, head } => {
                    if layer >= cfg.n_layers || head >= cfg.n_heads {
                        return Err(Error::NotFound(format!("hook target head {layer}.{head}")));
                    }
                }
                Component::Mlp { layer } => {
                    if layer >= cfg.n_layers {
                        return Err(Error::NotFound(format!("hook target mlp{layer}")));
                    }
                }
            }
            if hook.replacement.shape() != (n, cfg.d_resid) {
                return Err(Error::shape(format!(
                    "hook replacement is {}x{}, expected {}x{}",
                    hook.replacement.rows(),
                    hook.replacement.cols(),
                    n,
                    cfg.d_resid
                )));
            }
            if let Some(&p) = hook.positions.iter().find(|&&p| p >= n) {
                return Err(Error::shape(format!(
                    "hook position {p} outside sequence of length {n}"
                )));
            }
            let receivers = match &hook.route {
                HookRoute::Direct => continue,
                HookRoute::ViaValues { receivers } | HookRoute::ViaKeys { receivers } => receivers,
            };
            if receivers.is_empty() {
                return Err(Error::config("via-routed hook with no receiver heads"));
            }
            for &(l, h) in receivers {
                if l >= cfg.n_layers || h >= cfg.n_heads {
                    return Err(Error::NotFound(format!("hook receiver head {l}.{h}")));
                }
                // The receiver reads the residual stream at its own layer,
                // which only contains components of strictly earlier layers.
                let upstream = match hook.target.layer() {
                    None => true,
                    Some(tl) => tl < l,
                };
                if !upstream {
                    return Err(Error::config(format!(
                        "hook target {} is not upstream of receiver head {l}.{h}",
                        hook.target.label()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{special_tokens, ModelConfig};
    use crate::numerics::RngStream;

    fn tiny() -> ModelParams {
        let mut rng = RngStream::from_seed(17);
        ModelParams::init(ModelConfig::micro(12), &mut rng).unwrap()
    }

    fn tokens() -> Vec<u32> {
        vec![4, 5, 6, 7, 8, 9, 4, special_tokens::LABEL_NEG]
    }

    #[test]
    fn forward_shapes_and_finiteness() {
        let p = tiny();
        let t = tokens();
        let c = p.forward(&t).unwrap();
        assert_eq!(c.seq_len(), t.len());
        assert_eq!(c.resid.len(), p.config.n_layers + 1);
        assert_eq!(c.logits.shape(), (t.len(), p.config.vocab_size));
        for l in 0..p.config.n_layers {
            assert_eq!(c.mlp_out[l].shape(), (t.len(), p.config.d_resid));
            for h in 0..p.config.n_heads {
                assert_eq!(c.head_out[l][h].shape(), (t.len(), p.config.d_resid));
                assert_eq!(c.attn[l][h].shape(), (t.len(), t.len()));
            }
        }
        assert!(c.logits.all_finite());
    }

    #[test]
    fn residual_stream_is_exact_sum_of_components() {
        let p = tiny();
        let c = p.forward(&tokens()).unwrap();
        for l in 0..p.config.n_layers {
            // Recompute resid[l+1] from the cached pieces in the same order
            // the forward pass used; must match bit for bit.
            let mut acc = c.resid[l].clone();
            for h in 0..p.config.n_heads {
                acc.add_assign(&c.head_out[l][h]).unwrap();
            }
            acc.add_assign(&c.mlp_out[l]).unwrap();
            assert_eq!(acc, c.resid[l + 1], "layer {l} residual identity");
        }
    }

    #[test]
    fn attention_is_causal_and_normalized() {
        let p = tiny();
        let c = p.forward(&tokens()).unwrap();
        let n = c.seq_len();
        for l in 0..p.config.n_layers {
            for h in 0..p.config.n_heads {
                let a = &c.attn[l][h];
                for i in 0..n {
                    let sum: Real = a.row(i)[..=i].iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    for j in i + 1..n {
                        assert_eq!(a.get(i, j), 0.0, "future leak at {l}.{h} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn direct_self_patch_is_bitwise_identity() {
        let p = tiny();
        let t = tokens();
        let clean = p.forward(&t).unwrap();
        for target in [
            Component::Embed,
            Component::Head { layer: 1, head: 0 },
            Component::Mlp { layer: 0 },
        ] {
            let repl = clean.component_out(target).unwrap().clone();
            let hooked = p.forward_hooked(&t, &[Hook::direct(target, repl)]).unwrap();
            assert_eq!(
                hooked.logits, clean.logits,
                "self-patch of {} changed the logits",
                target.label()
            );
        }
    }

    #[test]
    fn via_values_self_patch_is_bitwise_identity() {
        let p = tiny();
        let t = tokens();
        let clean = p.forward(&t).unwrap();
        let repl = clean.component_out(Component::Mlp { layer: 0 }).unwrap().clone();
        let hook = Hook::via_values(Component::Mlp { layer: 0 }, vec![(1, 0), (1, 1)], repl);
        let hooked = p.forward_hooked(&t, &[hook]).unwrap();
        // Identical replacement rows are skipped, so this holds exactly.
        assert_eq!(hooked.logits, clean.logits);
    }

    #[test]
    fn direct_patch_changes_downstream_only() {
        let p = tiny();
        let t = tokens();
        let clean = p.forward(&t).unwrap();
        let mut repl = clean.component_out(Component::Mlp { layer: 0 }).unwrap().clone();
        repl.scale(-1.5);
        let hooked = p
            .forward_hooked(&t, &[Hook::direct(Component::Mlp { layer: 0 }, repl.clone())])
            .unwrap();
        // The patched output is recorded as patched...
        assert_eq!(hooked.mlp_out[0], repl);
        // ...layer-0 head outputs are upstream and unchanged...
        assert_eq!(hooked.head_out[0], clean.head_out[0]);
        assert_eq!(hooked.resid[0], clean.resid[0]);
        // ...and the final state actually moved.
        assert!(hooked.resid[2].sub(&clean.resid[2]).unwrap().max_abs() > 0.0);
    }

    #[test]
    fn via_values_leaves_non_receiver_heads_untouched() {
        let p = tiny();
        let t = tokens();
        let clean = p.forward(&t).unwrap();
        let mut repl = clean.resid[0].clone();
        repl.scale(0.0); // zero out the embedding as seen by the receiver
        let hook = Hook::via_values(Component::Embed, vec![(1, 1)], repl);
        let hooked = p.forward_hooked(&t, &[hook]).unwrap();
        // Receiver head (1,1) sees different values...
        assert!(
            hooked.head_out[1][1]
                .sub(&clean.head_out[1][1])
                .unwrap()
                .max_abs()
                > 0.0
        );
        // ...its sibling (1,0) and everything at layer 0 do not.
        assert_eq!(hooked.head_out[1][0], clean.head_out[1][0]);
        assert_eq!(hooked.head_out[0], clean.head_out[0]);
        assert_eq!(hooked.mlp_out[0], clean.mlp_out[0]);
        // Attention patterns of the receiver are untouched by a value-side
        // swap (queries and keys unchanged).
        assert_eq!(hooked.attn[1][1], clean.attn[1][1]);
    }

    #[test]
    fn via_keys_changes_attention_pattern_not_values() {
        let p = tiny();
        let t = tokens();
        let clean = p.forward(&t).unwrap();
        let mut repl = clean.resid[0].clone();
        repl.scale(3.0);
        let hook = Hook::via_keys(Component::Embed, vec![(1, 0)], repl);
        let hooked = p.forward_hooked(&t, &[hook]).unwrap();
        assert!(
            hooked.attn[1][0]
                .sub(&clean.attn[1][0])
                .unwrap()
                .max_abs()
                > 0.0,
            "key swap must move the receiver's attention pattern"
        );
        assert_eq!(hooked.attn[1][1], clean.attn[1][1]);
    }

    #[test]
    fn hook_validation_rejects_bad_specs() {
        let p = tiny();
        let t = tokens();
        let n = t.len();
        let d = p.config.d_resid;
        let ok = Matrix::zeros(n, d);
        // Unknown target.
        assert!(p
            .forward_hooked(&t, &[Hook::direct(Component::Head { layer: 9, head: 0 }, ok.clone())])
            .is_err());
        // Bad replacement shape.
        assert!(p
            .forward_hooked(&t, &[Hook::direct(Component::Embed, Matrix::zeros(n, d + 1))])
            .is_err());
        // Out-of-range position.
        let mut h = Hook::direct(Component::Embed, ok.clone());
        h.positions = vec![n];
        assert!(p.forward_hooked(&t, &[h]).is_err());
        // Receiver not downstream of target.
        let bad = Hook::via_values(Component::Mlp { layer: 1 }, vec![(1, 0)], ok.clone());
        assert!(p.forward_hooked(&t, &[bad]).is_err());
        // Empty receiver set.
        let bad = Hook::via_values(Component::Embed, vec![], ok);
        assert!(p.forward_hooked(&t, &[bad]).is_err());
    }

    #[test]
    fn ablated_head_output_is_zero_everywhere() {
        let p = tiny();
        let t = tokens();
        let ab = p.ablate_heads(&[(1, 1)]).unwrap();
        let c = ab.forward(&t).unwrap();
        assert_eq!(c.head_out[1][1].max_abs(), 0.0);
        assert!(c.head_out[1][0].max_abs() > 0.0);
    }
}
