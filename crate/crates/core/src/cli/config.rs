use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugPolicy;
use crate::dsp::{FeatureKind, FrameConfig};
use crate::seed::sha256_hex;
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// One candidate augmentation. Candidates sharing a `group` compete on
/// validation F1 and only the winner is scored on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(flatten)]
    pub policy: AugPolicy,
}

impl PolicyEntry {
    pub fn new(name: impl Into<String>, policy: AugPolicy) -> Self {
        Self {
            name: name.into(),
            group: None,
            policy,
        }
    }

    pub fn group(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    #[serde(default)]
    pub feature: FeatureKind,
    #[serde(default)]
    pub baseline: FrameConfig,
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(Error::invalid(format!("manifest {} does not exist", self.manifest.display())));
        }
        if self.policies.is_empty() {
            return Err(Error::invalid("experiment lists no policies"));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.policies {
            if entry.name.is_empty() || entry.name.contains(['/', '\\']) {
                return Err(Error::invalid(format!("policy name {:?} is not a plain file name", entry.name)));
            }
            if !seen.insert(entry.name.as_str()) {
                return Err(Error::invalid(format!("policy name {:?} used twice", entry.name)));
            }
            entry.policy.variants(&self.baseline, self.seed)?;
        }
        self.baseline.validate()?;
        self.train.validate()
    }

    /// SHA-256 of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&canonical).expect("config serializes"))
    }

    /// Distinct groups in order of first appearance.
    pub fn groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.policies {
            if !out.contains(&e.group()) {
                out.push(e.group());
            }
        }
        out
    }
}
