//! Checkpoints are directories holding `manifest.json` and `tensors.bin`.
//! The blob is the concatenation of every tensor as little-endian `f32`;
//! the manifest lists name, shape and byte offset for each.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelWeights};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const BLOB: &str = "tensors.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerManifest {
    pub step: u64,
    /// Moment tensors, named `m.<param>` and `v.<param>`.
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub dtype: String,
    pub blob: String,
    pub blob_bytes: u64,
    pub tensors: Vec<TensorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerManifest>,
    /// Free-form training state (step, tokens seen, data cursor).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

/// AdamW moments.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: ModelWeights<f32>,
    pub v: ModelWeights<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub weights: ModelWeights<f32>,
    pub optimizer: Option<OptimizerState>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn weights_only(weights: ModelWeights<f32>) -> Self {
        Self {
            weights,
            optimizer: None,
            meta: serde_json::Value::Null,
        }
    }
}

fn append(blob: &mut Vec<u8>, entries: &mut Vec<TensorEntry>, prefix: &str, w: &ModelWeights<f32>) {
    for (name, shape, data) in w.tensors() {
        entries.push(TensorEntry {
            name: format!("{prefix}{name}"),
            shape,
            dtype: "f32".into(),
            offset: blob.len() as u64,
        });
        for x in data {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the checkpoint into `dir`, creating it if needed. The blob is
/// renamed into place before the manifest, so a present manifest always
/// describes a complete blob.
pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut tensors = Vec::new();
    append(&mut blob, &mut tensors, "", &ckpt.weights);
    let optimizer = ckpt.optimizer.as_ref().map(|o| {
        let mut t = Vec::new();
        append(&mut blob, &mut t, "m.", &o.m);
        append(&mut blob, &mut t, "v.", &o.v);
        OptimizerManifest {
            step: o.step,
            tensors: t,
        }
    });
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: ckpt.weights.config.clone(),
        dtype: "f32".into(),
        blob: BLOB.into(),
        blob_bytes: blob.len() as u64,
        tensors,
        optimizer,
        meta: ckpt.meta.clone(),
    };
    write_atomic(&dir.join(BLOB), &blob)?;
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

fn fill(blob: &[u8], entries: &[TensorEntry], prefix: &str, w: &mut ModelWeights<f32>) -> Result<()> {
    for (name, shape, data) in w.tensors_mut() {
        let full = format!("{prefix}{name}");
        let e = entries
            .iter()
            .find(|e| e.name == full)
            .ok_or_else(|| Error::Format(format!("tensor {full} missing from manifest")))?;
        if e.shape != shape {
            return Err(Error::Format(format!(
                "tensor {full} has shape {:?}, config implies {shape:?}",
                e.shape
            )));
        }
        if e.dtype != "f32" {
            return Err(Error::Format(format!("tensor {full} has dtype {}", e.dtype)));
        }
        let start = e.offset as usize;
        let end = start + 4 * data.len();
        let bytes = blob
            .get(start..end)
            .ok_or_else(|| Error::Format(format!("tensor {full} runs past the blob")))?;
        for (x, b) in data.iter_mut().zip(bytes.chunks_exact(4)) {
            *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let blob = fs::read(dir.join(&manifest.blob))?;
    if blob.len() as u64 != manifest.blob_bytes {
        return Err(Error::Format(format!(
            "blob has {} bytes, manifest says {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let mut weights = ModelWeights::<f32>::zeros(&manifest.config)?;
    fill(&blob, &manifest.tensors, "", &mut weights)?;
    if !weights.is_finite() {
        return Err(Error::Format("non-finite weights".into()));
    }
    let optimizer = match &manifest.optimizer {
        None => None,
        Some(o) => {
            let mut m = weights.zeros_like();
            let mut v = weights.zeros_like();
            fill(&blob, &o.tensors, "m.", &mut m)?;
            fill(&blob, &o.tensors, "v.", &mut v)?;
            Some(OptimizerState { step: o.step, m, v })
        }
    };
    Ok(Checkpoint {
        weights,
        optimizer,
        meta: manifest.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn round_trip_with_optimizer() {
        let c = ModelConfig::tiny();
        let mut w = ModelWeights::<f32>::zeros(&c).unwrap();
        let mut rng = RngState::new(1);
        for (_, _, t) in w.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.normal() as f32);
        }
        let mut m = w.zeros_like();
        m.lm_head.set(0, 0, 0.25);
        let ckpt = Checkpoint {
            optimizer: Some(OptimizerState {
                step: 7,
                m,
                v: w.zeros_like(),
            }),
            weights: w,
            meta: serde_json::json!({"step": 7}),
        };
        let dir = std::env::temp_dir().join(format!("sinklab-ckpt-{}", std::process::id()));
        save_checkpoint(&dir, &ckpt).unwrap();
        let back = load_checkpoint(&dir).unwrap();
        assert_eq!(back, ckpt);
        fs::remove_dir_all(&dir).unwrap();
    }
}
