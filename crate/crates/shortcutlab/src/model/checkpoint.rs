// SPDX-License-Identifier: MIT OR Apache-2.0

//! Checkpoint serialization.
//!
//! A checkpoint is a single self-describing binary file:
//!
//! ```text
//! magic "SCLB" | u32 version | u64 manifest length | manifest JSON | raw tensors
//! ```
//!
//! The JSON manifest carries the model configuration, the scalar precision
//! the file was written with, the training seed (when known), free-form
//! metadata, and the name/shape of every tensor in file order. Tensor data
//! follows as little-endian scalars in exactly the manifest's order, which
//! is the canonical order of [`ModelParams::for_each_tensor`].
//!
//! Loading verifies magic, version, precision, and the complete tensor
//! inventory (names, shapes, no extras, no leftovers), so a truncated or
//! mismatched file fails loudly instead of producing a silently wrong model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Real;

const MAGIC: &[u8; 4] = b"SCLB";
const VERSION: u32 = 1;

#[cfg(not(feature = "f32"))]
const SCALAR: &str = "f64";
#[cfg(feature = "f32")]
const SCALAR: &str = "f32";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    scalar: String,
    config: ModelConfig,
    seed: Option<u64>,
    #[serde(default)]
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Descriptive information read back from a checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointInfo {
    /// Training seed recorded at save time, if any.
    pub seed: Option<u64>,
    /// Scalar type the file stores (`"f64"` or `"f32"`).
    pub scalar: String,
    /// Free-form metadata recorded at save time.
    pub meta: serde_json::Value,
}

/// Write `params` to `path`.
///
/// `seed` and `meta` are stored verbatim in the manifest for provenance;
/// pass `serde_json::Value::Null` when there is nothing to record.
///
/// # Errors
///
/// Returns [`Error::Io`] / [`Error::Json`] on write or encode failure.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    seed: Option<u64>,
    meta: serde_json::Value,
) -> Result<()> {
    let mut tensors = Vec::new();
    params.for_each_tensor(|name, m| {
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows: m.rows(),
            cols: m.cols(),
        });
    });
    let manifest = Manifest {
        format_version: VERSION,
        scalar: SCALAR.to_string(),
        config: params.config.clone(),
        seed,
        meta,
        tensors,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(manifest_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    let mut io_err: Option<std::io::Error> = None;
    params.for_each_tensor(|_, m| {
        if io_err.is_some() {
            return;
        }
        for v in m.data() {
            if let Err(e) = w.write_all(&v.to_le_bytes()) {
                io_err = Some(e);
                return;
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
///
/// # Errors
///
/// Returns [`Error::Format`] for bad magic, unsupported version, a scalar
/// precision different from this build, an invalid configuration, a tensor
/// inventory that does not match the configuration, or trailing bytes; and
/// [`Error::Io`] on read failure (including truncation).
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointInfo)> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "not a checkpoint file (magic {magic:02x?})"
        )));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version} not supported (expected {VERSION})"
        )));
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    if manifest_len > 1 << 24 {
        return Err(Error::Format(format!(
            "implausible manifest length {manifest_len}"
        )));
    }
    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes)?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)?;

    if manifest.scalar != SCALAR {
        return Err(Error::Format(format!(
            "checkpoint stores {} values but this build uses {SCALAR}; \
             retrain or rebuild with the matching precision feature",
            manifest.scalar
        )));
    }
    manifest.config.validate()?;

    // Build a zero-filled parameter set of the declared shape, then fill
    // tensors strictly in manifest order while checking the inventory.
    let mut rng = crate::numerics::RngStream::from_seed(0);
    let mut params = ModelParams::init(manifest.config.clone(), &mut rng)?.zeros_like();
    let mut expected = Vec::new();
    params.for_each_tensor(|name, m| expected.push((name.to_string(), m.shape())));
    if manifest.tensors.len() != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint lists {} tensors, model needs {}",
            manifest.tensors.len(),
            expected.len()
        )));
    }
    for (entry, (name, shape)) in manifest.tensors.iter().zip(expected.iter()) {
        if &entry.name != name {
            return Err(Error::Format(format!(
                "tensor order mismatch: file has {:?}, expected {:?}",
                entry.name, name
            )));
        }
        if (entry.rows, entry.cols) != *shape {
            return Err(Error::Format(format!(
                "tensor {:?} is {}x{} in the file but {}x{} in the config",
                entry.name, entry.rows, entry.cols, shape.0, shape.1
            )));
        }
    }

    let scalar_size = std::mem::size_of::<Real>();
    let mut read_err: Option<Error> = None;
    params.for_each_tensor_mut(|name, m| {
        if read_err.is_some() {
            return;
        }
        let mut buf = vec![0u8; std::mem::size_of_val(m.data())];
        if let Err(e) = r.read_exact(&mut buf) {
            read_err = Some(Error::Format(format!(
                "checkpoint truncated while reading tensor {name:?}: {e}"
            )));
            return;
        }
        for (dst, chunk) in m.data_mut().iter_mut().zip(buf.chunks_exact(scalar_size)) {
            let mut bytes = [0u8; 8];
            bytes[..scalar_size].copy_from_slice(chunk);
            #[cfg(not(feature = "f32"))]
            {
                *dst = Real::from_le_bytes(bytes);
            }
            #[cfg(feature = "f32")]
            {
                let mut four = [0u8; 4];
                four.copy_from_slice(&bytes[..4]);
                *dst = Real::from_le_bytes(four);
            }
        }
    });
    if let Some(e) = read_err {
        return Err(e);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "checkpoint has trailing bytes after the last tensor".into(),
        ));
    }

    let info = CheckpointInfo {
        seed: manifest.seed,
        scalar: manifest.scalar,
        meta: manifest.meta,
    };
    Ok((params, info))
}
