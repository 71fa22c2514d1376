//! Pool-based active learning: pool bookkeeping, the simulated oracle,
//! training schedules, selection strategies and the experiment loop.

mod experiment;
mod pool;
mod strategy;
mod train;

use serde::{Deserialize, Serialize};

pub use experiment::{
    init_pools, reconstructor_embeddings, run_experiment, run_experiment_with, stream, trial_seed, CurveRecord,
    LearningCurve,
};
pub use pool::{Oracle, PoolState};
pub use strategy::{entropy_topk, select, top_k, Models, Strategy};
pub use train::{
    accuracy, pretrain_reconstructor, train_sraal, train_sraal_from, train_target, SraalTraining, StateLabels,
};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nets::Architecture;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    Random,
    Kcenter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub target_epochs: usize,
    pub sraal_epochs: usize,
    /// Unsupervised reconstructor epochs before k-center initialization.
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            target_epochs: 100,
            sraal_epochs: 50,
            pretrain_epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
        }
    }
}

/// Everything one active-learning trial needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlConfig {
    pub initial_fraction: f64,
    pub step_fraction: f64,
    pub budget_fraction: f64,
    pub init: InitMode,
    /// Random starting points for k-center initialization.
    pub kcenter_seeds: usize,
    pub weights: LossWeights,
    pub arch: Architecture,
    pub schedule: Schedule,
    /// Train `sraal-no-oui` with the binary `-log(1 - D)` loss instead of
    /// the relabeled loss at indicator 1. The two are numerically identical.
    pub binary_state_loss: bool,
    /// Fill the `seconds` column with wall-clock time (breaks byte-identical reruns).
    pub record_timing: bool,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            initial_fraction: 0.10,
            step_fraction: 0.05,
            budget_fraction: 0.40,
            init: InitMode::Random,
            kcenter_seeds: 1,
            weights: LossWeights::default(),
            arch: Architecture::default(),
            schedule: Schedule::default(),
            binary_state_loss: false,
            record_timing: false,
        }
    }
}

/// Pool sizes derived from the fractions for a given training-set size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plan {
    pub initial: usize,
    pub step: usize,
    pub rounds: usize,
}

impl AlConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |path: &str, msg: String| Error::Config { path: path.into(), msg };
        for (path, v) in [
            ("initial_fraction", self.initial_fraction),
            ("step_fraction", self.step_fraction),
            ("budget_fraction", self.budget_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(cfg(path, format!("{v} is not in (0, 1]")));
            }
        }
        if self.budget_fraction < self.initial_fraction {
            return Err(cfg("budget_fraction", "smaller than initial_fraction".into()));
        }
        if self.kcenter_seeds == 0 {
            return Err(cfg("kcenter_seeds", "must be >= 1".into()));
        }
        if self.schedule.batch_size == 0 {
            return Err(cfg("schedule.batch_size", "must be >= 1".into()));
        }
        if !(self.schedule.learning_rate > 0.0 && self.schedule.learning_rate.is_finite()) {
            return Err(cfg("schedule.learning_rate", "must be > 0".into()));
        }
        if self.arch.latent_dim == 0 {
            return Err(cfg("arch.latent_dim", "must be >= 1".into()));
        }
        self.weights
            .validate()
            .map_err(|e| cfg("weights", e.to_string()))?;
        let rounds = self.rounds();
        if self.initial_fraction + rounds as f64 * self.step_fraction > 1.0 + 1e-9 {
            return Err(cfg("budget_fraction", "initial + rounds * step exceeds 1".into()));
        }
        Ok(())
    }

    /// Labeling rounds after initialization.
    pub fn rounds(&self) -> usize {
        ((self.budget_fraction - self.initial_fraction) / self.step_fraction + 1e-9).round() as usize
    }

    pub fn plan(&self, n_train: usize) -> Result<Plan> {
        let initial = (self.initial_fraction * n_train as f64).round() as usize;
        let step = (self.step_fraction * n_train as f64).round() as usize;
        let rounds = self.rounds();
        if initial == 0 || (rounds > 0 && step == 0) {
            return Err(Error::Config {
                path: "initial_fraction".into(),
                msg: format!("pools of {initial} / {step} samples are too small for {n_train} training samples"),
            });
        }
        if initial + rounds * step > n_train {
            return Err(Error::Config {
                path: "budget_fraction".into(),
                msg: format!("{initial} + {rounds} x {step} exceeds {n_train} training samples"),
            });
        }
        Ok(Plan { initial, step, rounds })
    }
}
