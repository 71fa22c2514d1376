use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alcore::{AlConfig, InitMode, Schedule, Strategy};
use crate::data::{generate, load_csv, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nets::Architecture;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    /// Labeled feature CSV; split 80/20 (stratified) with the master seed.
    Csv { path: PathBuf, classes: Option<usize> },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetConfig {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DatasetConfig::Synthetic(spec) => {
                spec.validate().map_err(|e| Error::Config {
                    path: "dataset".into(),
                    msg: e.to_string(),
                })?;
                generate(spec)
            }
            DatasetConfig::Csv { path, classes } => load_csv(path, true, *classes, seed),
        }
    }
}

/// Experiment description read from a TOML file. Unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub out: PathBuf,
    pub initial_fraction: f64,
    pub step_fraction: f64,
    pub budget_fraction: f64,
    pub init: InitMode,
    pub kcenter_seeds: usize,
    pub binary_state_loss: bool,
    pub record_timing: bool,
    pub dataset: DatasetConfig,
    pub weights: LossWeights,
    pub arch: Architecture,
    pub schedule: Schedule,
}

impl Default for RunConfig {
    fn default() -> Self {
        let al = AlConfig::default();
        RunConfig {
            seed: 0,
            trials: 5,
            strategies: vec![Strategy::Sraal, Strategy::Random],
            out: PathBuf::from("results"),
            initial_fraction: al.initial_fraction,
            step_fraction: al.step_fraction,
            budget_fraction: al.budget_fraction,
            init: al.init,
            kcenter_seeds: al.kcenter_seeds,
            binary_state_loss: al.binary_state_loss,
            record_timing: al.record_timing,
            dataset: DatasetConfig::default(),
            weights: al.weights,
            arch: al.arch,
            schedule: al.schedule,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            msg: e.to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            msg: e.inner().to_string().trim_end().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn al_config(&self) -> AlConfig {
        AlConfig {
            initial_fraction: self.initial_fraction,
            step_fraction: self.step_fraction,
            budget_fraction: self.budget_fraction,
            init: self.init,
            kcenter_seeds: self.kcenter_seeds,
            weights: self.weights,
            arch: self.arch.clone(),
            schedule: self.schedule.clone(),
            binary_state_loss: self.binary_state_loss,
            record_timing: self.record_timing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config {
                path: "trials".into(),
                msg: "must be >= 1".into(),
            });
        }
        if self.strategies.is_empty() {
            return Err(Error::Config {
                path: "strategies".into(),
                msg: "empty strategy list".into(),
            });
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::Config {
                    path: format!("strategies[{i}]"),
                    msg: format!("duplicate strategy `{}`", s.name()),
                });
            }
        }
        self.al_config().validate()
    }

    /// SHA-256 over the canonical JSON form of the resolved config. The
    /// output directory is excluded so that moving results keeps the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
