//! Run configuration file (JSON). Unknown keys are rejected so that typos
//! fail loudly instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use arma_core::data::SplitSpec;
use arma_core::model::Variant;
use arma_core::optim::OptimConfig;
use arma_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable naming the directory searched for datasets that are
/// not found at the configured path.
pub const DATA_DIR_ENV: &str = "ARMA_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV path, or a file name looked up under `ARMA_DATA_DIR`.
    pub dataset: String,
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_split")]
    pub split_fractions: [f64; 3],
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_k() -> usize {
    arma_core::conv::DEFAULT_KERNEL_SIZE
}
fn default_variant() -> Variant {
    Variant::Arma
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    1e-3
}
fn default_max_epochs() -> usize {
    100
}
fn default_patience() -> usize {
    10
}
fn default_split() -> [f64; 3] {
    [0.7, 0.1, 0.2]
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// A config with every optional key at its default.
    pub fn new(dataset: impl Into<String>, lookback: usize, horizon: usize) -> Self {
        Self {
            dataset: dataset.into(),
            lookback,
            horizon,
            k: default_k(),
            variant: default_variant(),
            seed: 0,
            batch: default_batch(),
            lr: default_lr(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            split_fractions: default_split(),
            out_dir: default_out_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Config(format!("config file {} not found", path.display())),
            _ => CliError::io(path)(e),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn split_spec(&self) -> SplitSpec {
        let [train, val, test] = self.split_fractions;
        SplitSpec { train, val, test }
    }

    /// Training settings for a dataset with `channels` value columns.
    pub fn train_config(&self, channels: usize) -> TrainConfig {
        TrainConfig {
            lookback: self.lookback,
            horizon: self.horizon,
            kernel_size: self.k,
            channels,
            batch: self.batch,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            variant: self.variant,
            optim: OptimConfig {
                lr: self.lr,
                ..OptimConfig::default()
            },
        }
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.dataset.trim().is_empty() {
            return Err(CliError::Config("dataset must not be empty".into()));
        }
        self.split_spec().validate()?;
        self.train_config(1).validate()?;
        Ok(())
    }

    /// The dataset path as given if it exists, otherwise `$ARMA_DATA_DIR/<dataset>`
    /// (with `.csv` appended if needed).
    pub fn resolve_dataset(&self) -> Result<PathBuf> {
        resolve_dataset(&self.dataset)
    }
}

pub fn resolve_dataset(dataset: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(dataset);
    if direct.is_file() {
        return Ok(direct);
    }
    let mut tried = vec![direct.display().to_string()];
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        let dir = PathBuf::from(dir);
        for name in [dataset.to_string(), format!("{dataset}.csv")] {
            let candidate = dir.join(&name);
            if candidate.is_file() {
                return Ok(candidate);
            }
            tried.push(candidate.display().to_string());
        }
    }
    Err(CliError::Data(format!(
        "dataset '{dataset}' not found (tried {}; set {DATA_DIR_ENV} to the dataset directory)",
        tried.join(", ")
    )))
}
