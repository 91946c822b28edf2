use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::providers::ProviderIdentity;
use crate::records::{read_json, write_json, ScoreSpec};
use crate::sampler::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Watermark,
    Verify,
    Simulate,
}

/// Everything needed to rerun a step. Maps are ordered so output is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset_id: String,
    pub phase: Phase,
    /// Role ("scoring", "target", ...) to identity.
    pub providers: BTreeMap<String, ProviderIdentity>,
    pub score_method: ScoreSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    /// Only set when the caller supplies one; runs are otherwise clock-free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(dataset_id: impl Into<String>, phase: Phase, score_method: ScoreSpec) -> Self {
        RunManifest {
            dataset_id: dataset_id.into(),
            phase,
            providers: BTreeMap::new(),
            score_method,
            alpha: None,
            strategy: None,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            created_at: None,
            warnings: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn provider(mut self, role: &str, identity: &ProviderIdentity) -> Self {
        self.providers.insert(role.to_string(), identity.clone());
        self
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn param(mut self, name: &str, value: impl Serialize) -> Self {
        self.params.insert(
            name.to_string(),
            serde_json::to_value(value).expect("parameter serializes"),
        );
        self
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}
