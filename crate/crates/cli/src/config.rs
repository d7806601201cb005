//! Run configuration: built-in defaults with a JSON file merged on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use sparsegrid::estimators::{EstimatorConfig, FineTuneConfig};
use sparsegrid::feeder::{parse_feeder, FeederModel};
use sparsegrid::loadmodel::{SamplerConfig, SynthConfig};
use sparsegrid::measerr::ErrorModelConfig;
use sparsegrid::placement::IntegratedConfig;
use sparsegrid::{fixtures, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `ieee34`, `ieee34_switchable` or a path to a feeder file.
    pub feeder: String,
    /// Smart-meter readings; synthesized from the feeder when absent.
    pub meters: Option<PathBuf>,
    pub synth: SynthConfig,
    pub error: ErrorModelConfig,
    pub sampler: SamplerConfig,
    pub dsse: EstimatorConfig,
    pub ti: EstimatorConfig,
    pub placement: IntegratedConfig,
    pub dsse_rows: usize,
    pub ti_rows_per_topology: usize,
    pub fine_tune: FineTuneConfig,
    pub fine_tune_rows: usize,
    /// Live snapshots per scenario step.
    pub snapshots: usize,
    /// Named switching scripts, one bit string per step.
    pub scenarios: BTreeMap<String, Vec<String>>,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feeder: "ieee34".into(),
            meters: None,
            synth: SynthConfig::default(),
            error: ErrorModelConfig::default(),
            sampler: SamplerConfig::default(),
            dsse: EstimatorConfig::dsse_default(),
            ti: EstimatorConfig::ti_default(),
            placement: IntegratedConfig::default(),
            dsse_rows: 12_500,
            ti_rows_per_topology: 500,
            fine_tune: FineTuneConfig::default(),
            fine_tune_rows: 1_000,
            snapshots: 200,
            scenarios: BTreeMap::new(),
            seed: 0,
            out: "artifacts".into(),
            workers: 1,
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut value = serde_json::to_value(Self::default())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            let over: Value = serde_json::from_str(&text)?;
            if !over.is_object() {
                return Err(Error::Schema { path: p.display().to_string(), detail: "config must be a JSON object".into() });
            }
            merge(&mut value, over);
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.feeder.as_str(), "ieee34" | "ieee34_switchable") && !Path::new(&self.feeder).exists() {
            return Err(Error::Invalid(format!("feeder file `{}` does not exist", self.feeder)));
        }
        if let Some(m) = &self.meters {
            if !m.exists() {
                return Err(Error::Invalid(format!("meter file `{}` does not exist", m.display())));
            }
        }
        if self.workers == 0 {
            return Err(Error::Invalid("workers must be at least 1".into()));
        }
        self.error.validate()?;
        self.sampler.validate()?;
        self.dsse.train.validate()?;
        self.ti.train.validate()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    pub fn model(&self) -> Result<FeederModel> {
        match self.feeder.as_str() {
            "ieee34" => Ok(fixtures::ieee34()),
            "ieee34_switchable" => Ok(fixtures::ieee34_switchable()),
            path => parse_feeder(&std::fs::read_to_string(path)?),
        }
    }
}
