//! Model checkpoints: a little-endian binary with a shape header followed by
//! the f64 payload, plus a JSON manifest (same stem, `.json`).
//!
//! ```text
//! magic b"FGSC", version u32, tensor count u32
//! per tensor: name length u32, name (utf-8), rows u32, cols u32
//! payload: every tensor's entries as f64, in header order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FgsanModel, ModelConfig, Variant};
use crate::numcore::Parameterized;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FGSC";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub variant: Variant,
    pub input_dim: usize,
    pub n_regions: usize,
    pub model: ModelConfig,
    /// Free-form training settings recorded alongside the weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<serde_json::Value>,
}

pub fn save_checkpoint<S: Scalar>(
    path: &Path,
    model: &FgsanModel<S>,
    manifest: &CheckpointManifest,
) -> Result<()> {
    let params = model.params();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (info, t) in &params {
        buf.extend_from_slice(&(info.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(info.name.as_bytes());
        buf.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    }
    for (_, t) in &params {
        for v in t.data() {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(FgsanModel<S>, CheckpointManifest)> {
    let corrupt = |detail: String| Error::Corrupt {
        path: path.to_path_buf(),
        detail,
    };
    let manifest: CheckpointManifest =
        serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)
            .map_err(|e| corrupt(format!("manifest: {e}")))?;
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let end = pos + len;
        if end > bytes.len() {
            return Err(corrupt(format!("truncated at byte {pos}")));
        }
        let out = &bytes[pos..end];
        pos = end;
        Ok(out)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;

    if take(4)? != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let version = u32_at(take(4)?);
    if version != CHECKPOINT_VERSION as usize || manifest.format_version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let count = u32_at(take(4)?);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(take(4)?);
        let name = String::from_utf8(take(len)?.to_vec())
            .map_err(|_| corrupt("non-utf8 tensor name".into()))?;
        let rows = u32_at(take(4)?);
        let cols = u32_at(take(4)?);
        shapes.push((name, rows, cols));
    }

    let mut model = FgsanModel::<S>::init(
        &manifest.model,
        manifest.variant,
        manifest.input_dim,
        manifest.n_regions,
        0,
    )?;
    let mut slots = model.params_mut();
    if slots.len() != shapes.len() {
        return Err(corrupt(format!(
            "{} tensors stored, model has {}",
            shapes.len(),
            slots.len()
        )));
    }
    for ((info, t), (name, rows, cols)) in slots.iter_mut().zip(&shapes) {
        if info.name != *name || t.shape() != (*rows, *cols) {
            return Err(corrupt(format!(
                "tensor {name} {rows}x{cols} does not match {} {:?}",
                info.name,
                t.shape()
            )));
        }
        let raw = take(rows * cols * 8)?;
        for (dst, c) in t.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = S::lit(f64::from_le_bytes(c.try_into().unwrap()));
        }
    }
    drop(slots);
    if pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok((model, manifest))
}
