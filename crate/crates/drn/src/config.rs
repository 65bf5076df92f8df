//! Experiment configuration, a single JSON document.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "variant": "drn",
//!   "data": { "synthetic": { "num_tasks": 4, "feature_dim": 20, "num_classes": 3,
//!             "task_covariance": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],
//!             "noise_scale": 1.0, "seed": 7, "train_per_task": 30, "test_per_task": 500 } },
//!   "network": { "trunk_widths": [], "bottleneck": 32, "task_init": "shared" },
//!   "train": { "learning_rate": 0.01, "epochs": 50, "prior_weight": 0.002, "epsilon_ridge": 3.0 }
//! }
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use drn_core::data::{SplitSpec, SyntheticSpec};
use drn_core::net::TaskInit;
use drn_core::trainer::{LrSchedule, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::matrix_from_rows;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Prior on the bottleneck and classifier layers.
    Drn,
    /// Bottleneck moved into the shared trunk; prior on the classifier only.
    Drn8,
    /// One independent network per task with a fixed isotropic prior.
    Stl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub variant: Variant,
    pub data: DataSource,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainSection,
}

/// Exactly one data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Manifest(ManifestSource),
    Synthetic(SyntheticSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub split: SplitSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub seed: u64,
}

impl From<SplitSection> for SplitSpec {
    fn from(s: SplitSection) -> Self {
        SplitSpec {
            train_fraction: s.train_fraction,
            stratified: s.stratified,
            seed: s.seed,
        }
    }
}

/// Generated data; the first `train_per_task` examples of each task train,
/// the next `test_per_task` test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub num_tasks: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub task_covariance: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
    pub train_per_task: usize,
    pub test_per_task: usize,
}

fn one() -> f64 {
    1.0
}

impl SyntheticSource {
    pub fn spec(&self) -> Result<SyntheticSpec> {
        Ok(SyntheticSpec {
            num_tasks: self.num_tasks,
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
            samples_per_task: self.train_per_task + self.test_per_task,
            task_covariance: matrix_from_rows(&self.task_covariance)?,
            noise_scale: self.noise_scale,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskInitName {
    Independent,
    Shared,
}

impl From<TaskInitName> for TaskInit {
    fn from(t: TaskInitName) -> Self {
        match t {
            TaskInitName::Independent => TaskInit::Independent,
            TaskInitName::Shared => TaskInit::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden widths of the shared trunk; empty feeds inputs straight to the
    /// task-specific layers.
    pub trunk_widths: Vec<usize>,
    /// Width of the task-specific bottleneck (256 in the original network).
    pub bottleneck: usize,
    pub task_init: TaskInitName,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            trunk_widths: Vec::new(),
            bottleneck: 32,
            task_init: TaskInitName::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrScheduleConfig {
    Constant,
    /// `lr · (1 + gamma·iter)^(−power)`.
    InverseDecay { gamma: f64, power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub epsilon_ridge: f64,
    pub prior_weight: f64,
    pub shared_task_sigma: bool,
    pub new_layer_lr_multiplier: f64,
    pub lr_schedule: LrScheduleConfig,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            batch_size: d.batch_size,
            epochs: d.epochs,
            epsilon_ridge: d.epsilon_ridge,
            prior_weight: d.prior_weight,
            shared_task_sigma: d.shared_task_sigma,
            new_layer_lr_multiplier: d.new_layer_lr_multiplier,
            lr_schedule: LrScheduleConfig::Constant,
            seed: d.seed,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
            epsilon_ridge: self.epsilon_ridge,
            prior_weight: self.prior_weight,
            shared_task_sigma: self.shared_task_sigma,
            new_layer_lr_multiplier: self.new_layer_lr_multiplier,
            lr_schedule: match self.lr_schedule {
                LrScheduleConfig::Constant => LrSchedule::Constant,
                LrScheduleConfig::InverseDecay { gamma, power } => {
                    LrSchedule::InverseDecay { gamma, power }
                }
            },
            learn_covariances: true,
            seed: self.seed,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the file and resolves a relative manifest path against its
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        if let DataSource::Manifest(m) = &mut cfg.data {
            if m.path.is_relative() {
                m.path = path.parent().unwrap_or(Path::new(".")).join(&m.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.network.bottleneck == 0 || self.network.trunk_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        self.train.to_train_config().validate()?;
        match &self.data {
            DataSource::Synthetic(s) => {
                if s.train_per_task == 0 {
                    return Err(Error::Config("train_per_task must be positive".into()));
                }
                s.spec()?;
            }
            DataSource::Manifest(m) => {
                let f = m.split.train_fraction;
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {f}")));
                }
            }
        }
        Ok(())
    }
}
