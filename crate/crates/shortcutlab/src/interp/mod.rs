// SPDX-License-Identifier: MIT OR Apache-2.0

//! Causal localization: logit difference, direct logit attribution, path
//! patching, circuit faithfulness, and head ablation.
//!
//! Everything here leans on one architectural fact: with no biases and no
//! normalization layers, the final residual vector is an exact sum
//!
//! ```text
//! x^L_T = x^0_T + Σ_{l,h} a^{l,h}_T + Σ_l m^l_T
//! ```
//!
//! and the logit difference is linear, so it decomposes over that sum with
//! no approximation. The decomposition (direct logit attribution) says which
//! components *write* the decision; [`patching`] says which ones *cause* it
//! along specific routes; [`faithfulness`] replays a candidate circuit's
//! edges on counterfactual inputs and measures how much behavior they carry.
//!
//! ## Sign conventions
//!
//! * `LD > 0` favors the positive label option (`B`).
//! * A patch result's `delta_ld` is `LD(clean) − LD(patched)`: positive
//!   means the patch pushed the prediction toward the negative label.

pub mod faithfulness;
pub mod patching;

use crate::error::{Error, Result};
use crate::model::ActivationCache;
use crate::model::{special_tokens, Component, ModelParams};
use crate::numerics::{Matrix, Real};

/// Logit difference of a residual-space vector:
/// `v·W_u[:,B] − v·W_u[:,A]`.
///
/// Computed as two full dot products subtracted once, matching the forward
/// pass's own accumulation order so that the result for the final residual
/// row is **bitwise identical** to `logits[B] − logits[A]`.
///
/// # Errors
///
/// Returns an error if `v` does not have `d_resid` entries.
pub fn logit_diff_vec(params: &ModelParams, v: &[Real]) -> Result<Real> {
    let d_resid = params.config.d_resid;
    if v.len() != d_resid {
        return Err(Error::shape(format!(
            "logit_diff_vec: vector has {} entries, d_resid is {d_resid}",
            v.len()
        )));
    }
    let pos = special_tokens::LABEL_POS as usize;
    let neg = special_tokens::LABEL_NEG as usize;
    let mut z_pos = 0.0;
    let mut z_neg = 0.0;
    for (k, &x) in v.iter().enumerate() {
        z_pos += x * params.w_unembed.get(k, pos);
        z_neg += x * params.w_unembed.get(k, neg);
    }
    Ok(z_pos - z_neg)
}

/// Logit difference of one row of an activation matrix.
///
/// # Errors
///
/// Returns an error if the row is out of range or the matrix is not
/// residual-shaped.
pub fn logit_diff_row(params: &ModelParams, m: &Matrix, row: usize) -> Result<Real> {
    if row >= m.rows() {
        return Err(Error::shape(format!(
            "logit_diff_row: row {row} out of {}",
            m.rows()
        )));
    }
    logit_diff_vec(params, m.row(row))
}

/// Logit difference read from cached logits at the final position.
///
/// # Errors
///
/// Returns an error on an empty cache.
pub fn final_logit_diff(cache: &ActivationCache) -> Result<Real> {
    let n = cache.seq_len();
    if n == 0 {
        return Err(Error::shape("final_logit_diff on empty sequence"));
    }
    let t = n - 1;
    let pos = special_tokens::LABEL_POS as usize;
    let neg = special_tokens::LABEL_NEG as usize;
    Ok(cache.logits.get(t, pos) - cache.logits.get(t, neg))
}

/// One component's direct logit contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DlaEntry {
    pub component: Component,
    /// `LD` of the component's write to the residual stream at the final
    /// position.
    pub ld: Real,
}

/// Exact decomposition of the final logit difference.
#[derive(Debug, Clone)]
pub struct DlaReport {
    /// `LD(x^L_T)`, read from the logits.
    pub total: Real,
    /// Embedding first, then heads layer-major, then MLPs by layer; the
    /// entry `ld`s sum to `total` up to float addition reordering (≤ 1e-9
    /// in practice).
    pub entries: Vec<DlaEntry>,
}

impl DlaReport {
    /// Sum of all component contributions.
    #[must_use]
    pub fn sum(&self) -> Real {
        self.entries.iter().map(|e| e.ld).sum()
    }

    /// The entry for a component, if present.
    #[must_use]
    pub fn entry(&self, c: Component) -> Option<&DlaEntry> {
        self.entries.iter().find(|e| e.component == c)
    }

    /// Head entries only, sorted by descending `|ld|`.
    #[must_use]
    pub fn heads_by_magnitude(&self) -> Vec<&DlaEntry> {
        let mut heads: Vec<&DlaEntry> = self
            .entries
            .iter()
            .filter(|e| matches!(e.component, Component::Head { .. }))
            .collect();
        heads.sort_by(|a, b| b.ld.abs().total_cmp(&a.ld.abs()));
        heads
    }
}

/// Decompose the final-position logit difference over every component's
/// residual-stream write.
///
/// # Errors
///
/// Returns an error if the cache does not match the model's architecture.
pub fn direct_logit_attribution(
    params: &ModelParams,
    cache: &ActivationCache,
) -> Result<DlaReport> {
    let cfg = &params.config;
    if cache.head_out.len() != cfg.n_layers {
        return Err(Error::shape(format!(
            "cache has {} layers, model has {}",
            cache.head_out.len(),
            cfg.n_layers
        )));
    }
    let t = cache.seq_len() - 1;
    let mut entries = Vec::with_capacity(1 + cfg.n_layers * (cfg.n_heads + 1));
    entries.push(DlaEntry {
        component: Component::Embed,
        ld: logit_diff_row(params, &cache.resid[0], t)?,
    });
    for layer in 0..cfg.n_layers {
        for head in 0..cfg.n_heads {
            entries.push(DlaEntry {
                component: Component::Head { layer, head },
                ld: logit_diff_row(params, &cache.head_out[layer][head], t)?,
            });
        }
    }
    for layer in 0..cfg.n_layers {
        entries.push(DlaEntry {
            component: Component::Mlp { layer },
            ld: logit_diff_row(params, &cache.mlp_out[layer], t)?,
        });
    }
    Ok(DlaReport {
        total: final_logit_diff(cache)?,
        entries,
    })
}

/// One head's view of one example for the name-attention scatter: how much
/// final-position attention lands on name tokens, against the head's direct
/// logit contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadNamePoint {
    pub layer: usize,
    pub head: usize,
    /// `Σ_{i ∈ name positions} A^{l,h}_{T,i}` — in `[0, 1]`.
    pub name_attention: Real,
    /// `LD(a^{l,h}_T)`.
    pub head_ld: Real,
}

/// Scatter data relating each head's attention on name tokens to its direct
/// logit contribution, for one cached example.
///
/// `name_positions` are absolute positions in the wrapped sequence.
///
/// # Errors
///
/// Returns an error if a position is out of range.
pub fn head_name_attention(
    params: &ModelParams,
    cache: &ActivationCache,
    name_positions: &[usize],
) -> Result<Vec<HeadNamePoint>> {
    let n = cache.seq_len();
    let t = n - 1;
    if let Some(&bad) = name_positions.iter().find(|&&p| p >= n) {
        return Err(Error::shape(format!(
            "name position {bad} out of sequence length {n}"
        )));
    }
    let cfg = &params.config;
    let mut points = Vec::with_capacity(cfg.n_layers * cfg.n_heads);
    for layer in 0..cfg.n_layers {
        for head in 0..cfg.n_heads {
            let attn = &cache.attn[layer][head];
            let name_attention: Real =
                name_positions.iter().map(|&i| attn.get(t, i)).sum();
            points.push(HeadNamePoint {
                layer,
                head,
                name_attention,
                head_ld: logit_diff_row(params, &cache.head_out[layer][head], t)?,
            });
        }
    }
    Ok(points)
}

/// Absolute wrapped-sequence positions covered by review-relative name
/// slots.
#[must_use]
pub fn wrapped_slot_positions(slots: &[crate::data::NameSlot]) -> Vec<usize> {
    let offset = crate::data::prompt::REVIEW_TOKEN_OFFSET;
    let mut out = Vec::new();
    for slot in slots {
        for i in slot.start..slot.end() {
            out.push(offset + i);
        }
    }
    out
}
