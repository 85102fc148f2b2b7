//! Experiment configuration, read from TOML with dotted keys
//! (`train.lr0 = 1e-3`) or tables (`[train]`). Every key is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_THRESHOLDS;
use crate::loss::LossConfig;
use crate::model::{ModelConfig, TrainConfig};
use crate::synth::CohortConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Classification only; forces `loss.lambda = 0`.
    SingleTask,
    #[default]
    MultiTask,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_task" | "single" => Ok(Mode::SingleTask),
            "multi_task" | "multi" => Ok(Mode::MultiTask),
            other => Err(Error::Config(format!(
                "mode must be single_task or multi_task, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub patients: Option<PathBuf>,
    pub scans: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub operating_point: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            operating_point: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub k_folds: usize,
    pub paths: Paths,
    pub cohort: CohortConfig,
    /// `model.input_dim` is taken from the data at training time.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::MultiTask,
            k_folds: 5,
            paths: Paths::default(),
            cohort: CohortConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The frozen reference experiment shipped with the crate.
    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("reference config parses")
    }

    /// Sets the mode, forcing `lambda = 0` for single-task runs.
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        if mode == Mode::SingleTask {
            self.loss.lambda = 0.0;
        }
        self
    }

    /// Applies the mode rules and returns the training config with the loss attached.
    pub fn effective_train(&self) -> Result<TrainConfig> {
        let mut loss = self.loss;
        match self.mode {
            Mode::SingleTask => loss.lambda = 0.0,
            Mode::MultiTask if loss.lambda <= 0.0 => {
                return Err(Error::Config("multi_task mode requires loss.lambda > 0".into()))
            }
            Mode::MultiTask => {}
        }
        let train = TrainConfig {
            loss,
            ..self.train.clone()
        };
        train.validate()?;
        Ok(train)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config("k_folds must be at least 2".into()));
        }
        if self.eval.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("eval.thresholds must be finite".into()));
        }
        if !(self.eval.operating_point > 0.0 && self.eval.operating_point < 1.0) {
            return Err(Error::Config("eval.operating_point must lie in (0, 1)".into()));
        }
        self.cohort.validate()?;
        self.effective_train()?;
        Ok(())
    }
}

pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");
