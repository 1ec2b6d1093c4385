// SPDX-License-Identifier: MIT OR Apache-2.0

//! The transformer under study: configuration, parameters, and a cached,
//! hookable forward pass.
//!
//! ## Architecture
//!
//! A decoder-only transformer stripped to the parts that matter for circuit
//! analysis: token + learned position embeddings, per-head attention with a
//! causal mask, and a GELU MLP per layer. There are **no biases and no
//! normalization layers**. That choice makes the residual stream an exact
//! sum of component outputs,
//!
//! ```text
//! x^{l+1} = x^l + sum_h a^{l,h} + m^l,
//! ```
//!
//! so "how much did head (l,h) contribute to this logit?" has a closed-form
//! answer instead of an approximation. The models trained here are small
//! enough that the missing stabilizers are not a problem in practice.
//!
//! ## Caching and hooks
//!
//! [`ModelParams::forward`] records every intermediate needed by the
//! analysis modules in an [`ActivationCache`]. [`ModelParams::forward_hooked`]
//! additionally accepts [`Hook`]s that splice stored activations into the
//! run — either overwriting a component's output (direct patching) or
//! swapping what specific downstream heads *see* when forming their values
//! or keys (path patching). See [`crate::interp`] for the protocols built on
//! top of these hooks.

mod checkpoint;
mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointInfo};
pub use forward::{ActivationCache, Hook, HookRoute};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real, RngStream};

/// Reserved token ids. The tokenizer guarantees these assignments.
pub mod special_tokens {
    /// Padding / neutral filler token.
    pub const PAD: u32 = 0;
    /// Out-of-vocabulary token.
    pub const UNK: u32 = 1;
    /// The label option read as "negative" (the literal token `A`).
    pub const LABEL_NEG: u32 = 2;
    /// The label option read as "positive" (the literal token `B`).
    pub const LABEL_POS: u32 = 3;
}

/// Sizes of every part of the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of transformer layers.
    pub n_layers: usize,
    /// Attention heads per layer.
    pub n_heads: usize,
    /// Residual stream width.
    pub d_resid: usize,
    /// Per-head key/query/value width.
    pub d_head: usize,
    /// MLP hidden width.
    pub d_mlp: usize,
    /// Vocabulary size (set from the tokenizer).
    pub vocab_size: usize,
    /// Maximum sequence length (learned positions).
    pub max_seq: usize,
}

impl ModelConfig {
    /// The workbench default: 4 layers, 4 heads, 128-wide residual stream,
    /// 32-wide heads, 512-wide MLPs, 128-token context.
    #[must_use]
    pub fn lab_default(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 4,
            n_heads: 4,
            d_resid: 128,
            d_head: 32,
            d_mlp: 512,
            vocab_size,
            max_seq: 128,
        }
    }

    /// A deliberately tiny configuration for gradient checks and unit tests.
    #[must_use]
    pub fn micro(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_resid: 16,
            d_head: 8,
            d_mlp: 24,
            vocab_size,
            max_seq: 24,
        }
    }

    /// A small-but-usable configuration for fast end-to-end runs: unlike
    /// [`ModelConfig::micro`] its context window fits full wrapped reviews.
    #[must_use]
    pub fn smoke(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_resid: 24,
            d_head: 12,
            d_mlp: 48,
            vocab_size,
            max_seq: 128,
        }
    }

    /// Check internal consistency.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Config`] if any size is zero, the head widths do not
    /// tile the residual stream, or the vocabulary is too small to contain
    /// the reserved special tokens.
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0
            || self.n_heads == 0
            || self.d_resid == 0
            || self.d_head == 0
            || self.d_mlp == 0
            || self.max_seq == 0
        {
            return Err(Error::config("all model dimensions must be positive"));
        }
        if self.n_heads * self.d_head != self.d_resid {
            return Err(Error::config(format!(
                "n_heads ({}) * d_head ({}) must equal d_resid ({})",
                self.n_heads, self.d_head, self.d_resid
            )));
        }
        if self.vocab_size <= special_tokens::LABEL_POS as usize {
            return Err(Error::config(format!(
                "vocab_size {} leaves no room for the reserved tokens",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// One attention head's weights. Shapes: `w_q`, `w_k`, `w_v` are
/// `d_resid x d_head`; `w_o` is `d_head x d_resid`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
}

/// One layer: its heads plus the MLP block (`w_in` is
/// `d_resid x d_mlp`, `w_out` is `d_mlp x d_resid`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    pub w_in: Matrix,
    pub w_out: Matrix,
}

/// Full parameter set. Also used as the gradient container: a gradient is a
/// `ModelParams` of identical shape holding `d loss / d weight` per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Token embeddings, `vocab_size x d_resid`.
    pub w_embed: Matrix,
    /// Learned position embeddings, `max_seq x d_resid`.
    pub w_pos: Matrix,
    pub layers: Vec<LayerParams>,
    /// Unembedding, `d_resid x vocab_size`.
    pub w_unembed: Matrix,
}

/// Initializer scale for most weights.
const INIT_STD: Real = 0.02;

fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize, std: Real) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.normal() * std;
    }
    m
}

impl ModelParams {
    /// Fresh random initialization.
    ///
    /// All weights are drawn i.i.d. normal with standard deviation 0.02,
    /// except the residual-writing projections `w_o` and `w_out`, which are
    /// additionally scaled by `1/sqrt(2 * n_layers)` so the residual stream
    /// variance stays flat with depth.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Config`] if the configuration is invalid.
    pub fn init(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let depth_scale = 1.0 / ((2 * config.n_layers) as Real).sqrt();
        let mut r = rng.split("model-init");
        let w_embed = random_matrix(&mut r, config.vocab_size, config.d_resid, INIT_STD);
        let w_pos = random_matrix(&mut r, config.max_seq, config.d_resid, INIT_STD);
        let mut layers = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let mut heads = Vec::with_capacity(config.n_heads);
            for _ in 0..config.n_heads {
                heads.push(HeadParams {
                    w_q: random_matrix(&mut r, config.d_resid, config.d_head, INIT_STD),
                    w_k: random_matrix(&mut r, config.d_resid, config.d_head, INIT_STD),
                    w_v: random_matrix(&mut r, config.d_resid, config.d_head, INIT_STD),
                    w_o: random_matrix(&mut r, config.d_head, config.d_resid, INIT_STD * depth_scale),
                });
            }
            layers.push(LayerParams {
                heads,
                w_in: random_matrix(&mut r, config.d_resid, config.d_mlp, INIT_STD),
                w_out: random_matrix(&mut r, config.d_mlp, config.d_resid, INIT_STD * depth_scale),
            });
        }
        let w_unembed = random_matrix(&mut r, config.d_resid, config.vocab_size, INIT_STD);
        Ok(ModelParams {
            config,
            w_embed,
            w_pos,
            layers,
            w_unembed,
        })
    }

    /// A same-shaped parameter set with every entry zero (gradient buffer).
    #[must_use]
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_tensor_mut(|_, m| {
            for v in m.data_mut() {
                *v = 0.0;
            }
        });
        out
    }

    /// Total number of scalar parameters.
    #[must_use]
    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|_, m| n += m.data().len());
        n
    }

    /// Visit every weight tensor in a fixed canonical order with its name.
    ///
    /// The order is: `embed`, `pos`, per layer (`layers.L.heads.H.w_q`,
    /// `w_k`, `w_v`, `w_o`, then `layers.L.mlp.w_in`, `w_out`), `unembed`.
    /// The checkpoint format, the optimizer state, and parameter flattening
    /// all rely on this single ordering. The matrix references outlive the
    /// call (they borrow `self`), so callers may collect them.
    pub fn for_each_tensor<'a>(&'a self, mut f: impl FnMut(&str, &'a Matrix)) {
        f("embed", &self.w_embed);
        f("pos", &self.w_pos);
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                f(&format!("layers.{l}.heads.{h}.w_q"), &head.w_q);
                f(&format!("layers.{l}.heads.{h}.w_k"), &head.w_k);
                f(&format!("layers.{l}.heads.{h}.w_v"), &head.w_v);
                f(&format!("layers.{l}.heads.{h}.w_o"), &head.w_o);
            }
            f(&format!("layers.{l}.mlp.w_in"), &layer.w_in);
            f(&format!("layers.{l}.mlp.w_out"), &layer.w_out);
        }
        f("unembed", &self.w_unembed);
    }

    /// Mutable version of [`ModelParams::for_each_tensor`], same order.
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut Matrix)) {
        f("embed", &mut self.w_embed);
        f("pos", &mut self.w_pos);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (h, head) in layer.heads.iter_mut().enumerate() {
                f(&format!("layers.{l}.heads.{h}.w_q"), &mut head.w_q);
                f(&format!("layers.{l}.heads.{h}.w_k"), &mut head.w_k);
                f(&format!("layers.{l}.heads.{h}.w_v"), &mut head.w_v);
                f(&format!("layers.{l}.heads.{h}.w_o"), &mut head.w_o);
            }
            f(&format!("layers.{l}.mlp.w_in"), &mut layer.w_in);
            f(&format!("layers.{l}.mlp.w_out"), &mut layer.w_out);
        }
        f("unembed", &mut self.w_unembed);
    }

    /// Flatten all parameters into one vector (canonical tensor order,
    /// row-major within each tensor). Used by the gradient checker.
    #[must_use]
    pub fn flatten(&self) -> Vec<Real> {
        let mut out = Vec::with_capacity(self.num_params());
        self.for_each_tensor(|_, m| out.extend_from_slice(m.data()));
        out
    }

    /// Inverse of [`ModelParams::flatten`].
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if `flat` has the wrong length.
    pub fn unflatten_into(&mut self, flat: &[Real]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "unflatten of {} values into a {}-parameter model",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        self.for_each_tensor_mut(|_, m| {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    /// In-place `self += other`, tensor by tensor. Used to reduce gradient
    /// partials; both sides must share one architecture.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] on architecture mismatch.
    pub fn accumulate(&mut self, other: &ModelParams) -> Result<()> {
        if self.config != other.config {
            return Err(Error::shape("accumulate across different architectures"));
        }
        let mut other_tensors = Vec::new();
        other.for_each_tensor(|_, m| other_tensors.push(m));
        let mut idx = 0;
        self.for_each_tensor_mut(|_, m| {
            for (a, b) in m.data_mut().iter_mut().zip(other_tensors[idx].data()) {
                *a += b;
            }
            idx += 1;
        });
        Ok(())
    }

    /// The combined value-output matrix `W_V W_O` of one head
    /// (`d_resid x d_resid`, rank at most `d_head`).
    ///
    /// Because the head's contribution to the residual stream is linear in
    /// its value inputs, `x_i W_V W_O` is exactly "what this head would copy
    /// from position `i` if it attended there fully".
    ///
    /// # Errors
    ///
    /// Returns [`Error::NotFound`] for an out-of-range layer or head.
    pub fn head_vo(&self, layer: usize, head: usize) -> Result<Matrix> {
        let h = self
            .layers
            .get(layer)
            .and_then(|l| l.heads.get(head))
            .ok_or_else(|| Error::NotFound(format!("head {layer}.{head}")))?;
        h.w_v.matmul(&h.w_o)
    }

    /// Token + position embedding of a prompt: row `i` is
    /// `w_embed[tokens[i]] + w_pos[i]`.
    ///
    /// # Errors
    ///
    /// Returns an error for an empty prompt, a prompt longer than the
    /// context window, or a token id outside the vocabulary.
    pub fn embed(&self, tokens: &[u32]) -> Result<Matrix> {
        if tokens.is_empty() {
            return Err(Error::Tokenizer("cannot embed an empty prompt".into()));
        }
        if tokens.len() > self.config.max_seq {
            return Err(Error::Tokenizer(format!(
                "prompt of {} tokens exceeds the {}-token context window",
                tokens.len(),
                self.config.max_seq
            )));
        }
        let mut x = Matrix::zeros(tokens.len(), self.config.d_resid);
        for (i, &t) in tokens.iter().enumerate() {
            let t = t as usize;
            if t >= self.config.vocab_size {
                return Err(Error::Tokenizer(format!(
                    "token id {t} outside vocabulary of size {}",
                    self.config.vocab_size
                )));
            }
            let row = x.row_mut(i);
            for (dst, (e, p)) in row
                .iter_mut()
                .zip(self.w_embed.row(t).iter().zip(self.w_pos.row(i).iter()))
            {
                *dst = e + p;
            }
        }
        Ok(x)
    }

    /// Zero-ablate a set of heads, returning an edited copy of the model.
    ///
    /// Both `w_v` and `w_o` of each listed head are zeroed, so the head's
    /// output is identically zero on every input — the edited model is a
    /// plain parameter set and every downstream tool works on it unchanged.
    ///
    /// # Errors
    ///
    /// Returns [`Error::NotFound`] if any `(layer, head)` pair is out of
    /// range, and [`Error::Config`] on duplicates.
    pub fn ablate_heads(&self, heads: &[(usize, usize)]) -> Result<ModelParams> {
        let mut seen = std::collections::HashSet::new();
        let mut out = self.clone();
        for &(l, h) in heads {
            if l >= self.config.n_layers || h >= self.config.n_heads {
                return Err(Error::NotFound(format!("head {l}.{h}")));
            }
            if !seen.insert((l, h)) {
                return Err(Error::config(format!("head {l}.{h} listed twice")));
            }
            let head = &mut out.layers[l].heads[h];
            for v in head.w_v.data_mut() {
                *v = 0.0;
            }
            for v in head.w_o.data_mut() {
                *v = 0.0;
            }
        }
        Ok(out)
    }
}

/// A patchable / attributable part of the model, identified structurally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// The embedding layer's write into the residual stream (token +
    /// position rows).
    Embed,
    /// One attention head's write.
    Head { layer: usize, head: usize },
    /// One MLP block's write.
    Mlp { layer: usize },
}

impl Component {
    /// Compact human-readable label: `embed`, `2.3` (layer.head), `mlp1`.
    #[must_use]
    pub fn label(&self) -> String {
        match self {
            Component::Embed => "embed".to_string(),
            Component::Head { layer, head } => format!("{layer}.{head}"),
            Component::Mlp { layer } => format!("mlp{layer}"),
        }
    }

    /// Parse the format produced by [`Component::label`].
    ///
    /// # Errors
    ///
    /// Returns [`Error::Format`] for unrecognized labels.
    pub fn parse(label: &str) -> Result<Self> {
        let label = label.trim();
        if label == "embed" {
            return Ok(Component::Embed);
        }
        if let Some(rest) = label.strip_prefix("mlp") {
            let layer = rest
                .parse()
                .map_err(|_| Error::Format(format!("bad component label {label:?}")))?;
            return Ok(Component::Mlp { layer });
        }
        if let Some((l, h)) = label.split_once('.') {
            let layer = l
                .parse()
                .map_err(|_| Error::Format(format!("bad component label {label:?}")))?;
            let head = h
                .parse()
                .map_err(|_| Error::Format(format!("bad component label {label:?}")))?;
            return Ok(Component::Head { layer, head });
        }
        Err(Error::Format(format!("bad component label {label:?}")))
    }

    /// The layer index after which this component's output is first present
    /// in the residual stream (`None` for the embedding, which is present
    /// from the start).
    #[must_use]
    pub fn layer(&self) -> Option<usize> {
        match self {
            Component::Embed => None,
            Component::Head { layer, .. } | Component::Mlp { layer } => Some(*layer),
        }
    }

    /// All heads and MLPs of a model, in layer order (heads before the MLP
    /// within each layer). The embedding is excluded: this is the default
    /// scan set for attribution and patching sweeps.
    #[must_use]
    pub fn scan_set(config: &ModelConfig) -> Vec<Component> {
        let mut out = Vec::new();
        for layer in 0..config.n_layers {
            for head in 0..config.n_heads {
                out.push(Component::Head { layer, head });
            }
            out.push(Component::Mlp { layer });
        }
        out
    }
}

/// GELU activation (tanh approximation).
#[inline]
#[must_use]
pub fn gelu(x: Real) -> Real {
    const SQRT_2_OVER_PI: Real = 0.797_884_560_802_865_4;
    const COEFF: Real = 0.044_715;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + COEFF * x * x * x)).tanh())
}

/// Derivative of [`gelu`] (closed form of the tanh approximation).
#[inline]
#[must_use]
pub fn gelu_prime(x: Real) -> Real {
    const SQRT_2_OVER_PI: Real = 0.797_884_560_802_865_4;
    const COEFF: Real = 0.044_715;
    let inner = SQRT_2_OVER_PI * (x + COEFF * x * x * x);
    let t = inner.tanh();
    let d_inner = SQRT_2_OVER_PI * (1.0 + 3.0 * COEFF * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_params() -> ModelParams {
        let mut rng = RngStream::from_seed(11);
        ModelParams::init(ModelConfig::micro(12), &mut rng).unwrap()
    }

    #[test]
    fn config_validation_catches_bad_shapes() {
        let mut c = ModelConfig::lab_default(100);
        assert!(c.validate().is_ok());
        c.d_head = 31;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::lab_default(100);
        c.n_layers = 0;
        assert!(c.validate().is_err());
        let c = ModelConfig::lab_default(3); // no room for specials
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_statistics_match_spec() {
        let mut rng = RngStream::from_seed(0);
        let p = ModelParams::init(ModelConfig::lab_default(500), &mut rng).unwrap();
        let std = |m: &Matrix| {
            let n = m.data().len() as Real;
            let mean: Real = m.data().iter().sum::<Real>() / n;
            (m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / n).sqrt()
        };
        let s_q = std(&p.layers[0].heads[0].w_q);
        assert!((s_q - 0.02).abs() < 0.002, "w_q std {s_q}");
        // Residual-writing matrices carry the 1/sqrt(2L) depth scaling.
        let expect_o = 0.02 / (8.0 as Real).sqrt();
        let s_o = std(&p.layers[0].heads[0].w_o);
        assert!((s_o - expect_o).abs() < 0.15 * expect_o, "w_o std {s_o}");
        let s_out = std(&p.layers[2].w_out);
        assert!((s_out - expect_o).abs() < 0.15 * expect_o, "w_out std {s_out}");
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mut a = RngStream::from_seed(123);
        let mut b = RngStream::from_seed(123);
        let pa = ModelParams::init(ModelConfig::micro(12), &mut a).unwrap();
        let pb = ModelParams::init(ModelConfig::micro(12), &mut b).unwrap();
        assert_eq!(pa, pb);
        let mut c = RngStream::from_seed(124);
        let pc = ModelParams::init(ModelConfig::micro(12), &mut c).unwrap();
        assert_ne!(pa, pc);
    }

    #[test]
    fn embed_adds_token_and_position_rows() {
        let p = tiny_params();
        let x = p.embed(&[4, 4]).unwrap();
        // Same token at two positions differs exactly by the position rows.
        for j in 0..p.config.d_resid {
            let diff = x.get(1, j) - x.get(0, j);
            let want = p.w_pos.get(1, j) - p.w_pos.get(0, j);
            assert!((diff - want).abs() < 1e-15);
        }
        assert!(p.embed(&[]).is_err());
        assert!(p.embed(&[99]).is_err());
        assert!(p.embed(&vec![4; p.config.max_seq + 1]).is_err());
    }

    #[test]
    fn flatten_roundtrip_and_param_count() {
        let p = tiny_params();
        let c = &p.config;
        let expect = c.vocab_size * c.d_resid
            + c.max_seq * c.d_resid
            + c.n_layers * (c.n_heads * 4 * c.d_resid * c.d_head + 2 * c.d_resid * c.d_mlp)
            + c.d_resid * c.vocab_size;
        assert_eq!(p.num_params(), expect);
        let flat = p.flatten();
        let mut q = p.zeros_like();
        assert!(q.flatten().iter().all(|&v| v == 0.0));
        q.unflatten_into(&flat).unwrap();
        assert_eq!(p, q);
        assert!(q.unflatten_into(&flat[1..]).is_err());
    }

    #[test]
    fn head_vo_matches_explicit_product() {
        let p = tiny_params();
        let vo = p.head_vo(1, 0).unwrap();
        assert_eq!(vo.shape(), (p.config.d_resid, p.config.d_resid));
        let explicit = p.layers[1].heads[0]
            .w_v
            .matmul(&p.layers[1].heads[0].w_o)
            .unwrap();
        assert_eq!(vo, explicit);
        assert!(p.head_vo(9, 0).is_err());
    }

    #[test]
    fn ablation_zeroes_exactly_the_named_heads() {
        let p = tiny_params();
        let ab = p.ablate_heads(&[(0, 1), (1, 0)]).unwrap();
        assert_eq!(ab.layers[0].heads[1].w_o.max_abs(), 0.0);
        assert_eq!(ab.layers[0].heads[1].w_v.max_abs(), 0.0);
        assert_eq!(ab.layers[1].heads[0].w_o.max_abs(), 0.0);
        // Untouched heads keep their weights.
        assert_eq!(ab.layers[0].heads[0], p.layers[0].heads[0]);
        assert_eq!(ab.layers[1].heads[1], p.layers[1].heads[1]);
        assert!(p.ablate_heads(&[(5, 0)]).is_err());
        assert!(p.ablate_heads(&[(0, 0), (0, 0)]).is_err());
    }

    #[test]
    fn component_labels_roundtrip() {
        for c in [
            Component::Embed,
            Component::Head { layer: 2, head: 3 },
            Component::Mlp { layer: 1 },
        ] {
            assert_eq!(Component::parse(&c.label()).unwrap(), c);
        }
        assert!(Component::parse("banana").is_err());
        assert!(Component::parse("mlpx").is_err());
        let cfg = ModelConfig::lab_default(100);
        let scan = Component::scan_set(&cfg);
        assert_eq!(scan.len(), cfg.n_layers * (cfg.n_heads + 1));
        assert!(!scan.contains(&Component::Embed));
    }

    #[test]
    fn gelu_matches_finite_difference() {
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 4.0] {
            let eps = 1e-6;
            let numeric = (gelu(x + eps) - gelu(x - eps)) / (2.0 * eps);
            let analytic = gelu_prime(x);
            assert!(
                (numeric - analytic).abs() < 1e-8,
                "gelu'({x}): {analytic} vs {numeric}"
            );
        }
        // Known anchor values of the tanh approximation.
        assert!((gelu(0.0)).abs() < 1e-15);
        assert!((gelu(1.0) - 0.841_192).abs() < 1e-5);
    }
}
