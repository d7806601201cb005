//! Self-describing JSON checkpoints.
//!
//! ```text
//! { "format": "sparsegrid-mlp", "version": 1,
//!   "meta": { "task", "feeder_fingerprint", "feature_names", "output_names", "label_map", "notes" },
//!   "params": { "input_width", "layers": [{ "spec", "w": {rows, cols, data}, "b" }],
//!               "input_scaler": {mean, std}, "output_scaler": {mean, std} } }
//! ```

use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use crate::{Error, Result};

pub const FORMAT: &str = "sparsegrid-mlp";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub task: String,
    pub feeder_fingerprint: String,
    pub feature_names: Vec<String>,
    pub output_names: Vec<String>,
    /// Class index to switch-configuration label, for classifiers.
    #[serde(default)]
    pub label_map: Vec<String>,
    #[serde(default)]
    pub notes: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub meta: CheckpointMeta,
    pub params: MlpParams,
}

impl Checkpoint {
    pub fn new(params: MlpParams, meta: CheckpointMeta) -> Self {
        Self { format: FORMAT.into(), version: VERSION, meta, params }
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<()> {
        if self.meta.feeder_fingerprint != fingerprint {
            return Err(Error::Fingerprint { checkpoint: self.meta.feeder_fingerprint.clone(), actual: fingerprint.into() });
        }
        Ok(())
    }
}

pub fn save_checkpoint(ck: &Checkpoint) -> String {
    serde_json::to_string(ck).expect("checkpoint serializes")
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Corrupt(format!("checkpoint is not valid JSON: {e}")))?;
    if v.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
        return Err(Error::Corrupt("not a network checkpoint".into()));
    }
    let found = v.get("version").and_then(|x| x.as_u64()).unwrap_or(0);
    if found != VERSION as u64 {
        return Err(Error::Version { expected: VERSION, found: found.min(u32::MAX as u64) as u32 });
    }
    let ck: Checkpoint = serde_json::from_value(v).map_err(|e| Error::Corrupt(e.to_string()))?;
    let p = &ck.params;
    let mut fan_in = p.input_width;
    for (l, layer) in p.layers.iter().enumerate() {
        if layer.w.rows != layer.spec.width || layer.w.cols != fan_in || layer.w.data.len() != layer.w.rows * layer.w.cols || layer.b.len() != layer.spec.width {
            return Err(Error::Corrupt(format!("layer {l} dimensions do not chain")));
        }
        fan_in = layer.spec.width;
    }
    if p.layers.is_empty()
        || p.input_scaler.mean.len() != p.input_width
        || p.input_scaler.std.len() != p.input_width
        || p.output_scaler.mean.len() != fan_in
        || p.output_scaler.std.len() != fan_in
        || p.input_scaler.std.iter().chain(&p.output_scaler.std).any(|s| !(*s > 0.0))
    {
        return Err(Error::Corrupt("scaler dimensions or values are invalid".into()));
    }
    Ok(ck)
}
