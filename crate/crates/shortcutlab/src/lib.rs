// SPDX-License-Identifier: MIT OR Apache-2.0

//! # shortcutlab
//!
//! A desk-scale workbench for a complete interpretability loop on tiny
//! transformers: **train** a model on a synthetic sentiment corpus with
//! injected shortcut cues, **localize** the mechanism the model learned for
//! those cues, **attribute** predictions back to input tokens, **mitigate**
//! the shortcut by editing the model, and **quantify** every step.
//!
//! Everything runs from one CLI and one library on a laptop CPU in minutes,
//! with no external ML framework: the forward pass, backpropagation,
//! attention-path patching, and all statistics live in this crate and are
//! cross-checked against independent oracles in the test suite.
//!
//! ## Map of the crate
//!
//! | module | contents |
//! |---|---|
//! | [`numerics`] | dense matrices, softmax, seeded RNG streams, gradient checker |
//! | [`model`] | transformer config, parameters, cached/hooked forward pass, checkpoints |
//! | [`data`] | synthetic review generator, shortcut injection, tokenizer, name-slot detection |
//! | [`training`] | prompts, backprop, Adam, the training loop, accuracy evaluation |
//! | [`interp`] | logit attribution, path patching, faithfulness protocol, head ablation |
//! | [`attribution`] | head-trace attribution plus surrogate and gradient baselines |
//! | [`eval`] | shortcut-reliance and detection metrics, frequency/purity sweeps |
//! | [`report`] | CSV/JSONL/SVG artifact writers |
//! | [`cli`] | the `shortcutlab` command-line interface |
//!
//! The companion guide in `book/` walks through the same pipeline chapter by
//! chapter; its code snippets compile and run as doc-tests via the [`guide`]
//! module, so the book cannot drift from the library.

pub mod attribution;
pub mod cli;
pub mod data;
pub mod eval;
pub mod error;
pub mod interp;
pub mod model;
pub mod numerics;
pub mod report;
pub mod training;

pub use error::{Error, Result};
pub use model::{ModelConfig, ModelParams};
pub use numerics::{Matrix, Real, RngStream};
