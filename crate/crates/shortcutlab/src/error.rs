// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.
//!
//! Every fallible public function in this crate returns [`Result`]. The
//! variants are intentionally coarse: callers almost always either report the
//! error and stop, or match on the broad category (shape bug vs. bad input
//! file), never on fine-grained detail.

use thiserror::Error;

/// All the ways a workbench operation can fail.
#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors (or a tensor and a config) disagree about dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numeric invariant was violated (non-finite value, empty input to a
    /// statistic, singular system, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A configuration value is out of range or internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Text could not be tokenized or de-tokenized under the current
    /// vocabulary, or a prompt does not fit the model's context window.
    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    /// A corpus, checkpoint, or report file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// A requested component (head, layer, actor, file) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Build a [`Error::Shape`] from anything displayable.
    pub fn shape(msg: impl std::fmt::Display) -> Self {
        Error::Shape(msg.to_string())
    }

    /// Build a [`Error::Numeric`] from anything displayable.
    pub fn numeric(msg: impl std::fmt::Display) -> Self {
        Error::Numeric(msg.to_string())
    }

    /// Build a [`Error::Config`] from anything displayable.
    pub fn config(msg: impl std::fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    /// Build a [`Error::Tokenizer`] from anything displayable.
    pub fn tokenizer(msg: impl std::fmt::Display) -> Self {
        Error::Tokenizer(msg.to_string())
    }

    /// A short machine-readable tag for this error's category, used by the
    /// CLI when emitting structured error reports.
    #[must_use]
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Tokenizer(_) => "tokenizer",
            Error::Format(_) => "format",
            Error::NotFound(_) => "not-found",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
