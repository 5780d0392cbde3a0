//! Run configuration: a TOML file plus command-line overrides (flags win).
//! The resolved configuration is echoed into every run directory so runs
//! stay reproducible from their artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flowids::datapipe::{BalanceMethod, BalanceOrder, PipelineConfig};
use flowids::error::{Error, Result};
use flowids::model::{ModelSpec, Variant};
use flowids::trainer::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Raw input CSV (used by `preprocess`).
    pub data: Option<PathBuf>,
    /// Schema TOML describing the CSV (used by `preprocess`).
    pub schema: Option<PathBuf>,
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,

    // Preprocessing.
    pub balance: BalanceMethod,
    pub balance_order: BalanceOrder,
    pub train_fraction: f64,
    pub scale: bool,
    pub smote_k: usize,

    // Architecture. `steps`/`n_classes`/`hidden` of 0 mean "infer" (from the
    // dataset, and from the variant respectively).
    pub variant: usize,
    pub steps: usize,
    pub n_classes: usize,
    pub embed_dim: usize,
    pub se_ratio: usize,
    pub hidden: usize,

    // Training.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub shuffle: bool,

    // Latency measurement.
    pub warmup: usize,
    pub reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let p = PipelineConfig::default();
        RunConfig {
            data: None,
            schema: None,
            seed: 0,
            balance: p.balance,
            balance_order: p.balance_order,
            train_fraction: p.train_fraction,
            scale: p.scale,
            smote_k: p.smote_k,
            variant: 3,
            steps: 0,
            n_classes: 0,
            embed_dim: 32,
            se_ratio: 4,
            hidden: 0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            eps_adam: t.eps_adam,
            shuffle: t.shuffle,
            warmup: 10,
            reps: 1000,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse config {}: {e}", path.display())))
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            balance: self.balance,
            balance_order: self.balance_order,
            train_fraction: self.train_fraction,
            scale: self.scale,
            smote_k: self.smote_k,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }

    /// Resolve the model spec against what the dataset provides. Explicit
    /// `steps`/`n_classes` must agree with the data; 0 infers them.
    pub fn model_spec(&self, data_steps: usize, data_classes: usize) -> Result<ModelSpec> {
        let variant = Variant::from_index(self.variant)?;
        if self.steps != 0 && self.steps != data_steps {
            return Err(Error::shape(
                "model_spec",
                format!(
                    "configured steps = {} but the dataset has {} features",
                    self.steps, data_steps
                ),
            ));
        }
        if self.n_classes != 0 && self.n_classes != data_classes {
            return Err(Error::shape(
                "model_spec",
                format!(
                    "configured n_classes = {} but the dataset has {} classes",
                    self.n_classes, data_classes
                ),
            ));
        }
        let mut spec = ModelSpec::new(variant, data_steps, data_classes);
        spec.embed_dim = self.embed_dim;
        spec.se_ratio = self.se_ratio;
        if self.hidden != 0 {
            spec.hidden = self.hidden;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Echo the resolved configuration into the run directory.
    pub fn write_into(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        fs::write(dir.join("resolved_config.toml"), text)?;
        Ok(())
    }
}
