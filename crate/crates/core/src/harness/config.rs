use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembler::AssemblyConfig;
use crate::baselines::SimpleParams;
use crate::datagen::{Family, LevelName, NoiseLevel};
use crate::diffusion::{ScheduleParams, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricOptions;

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub family: Family,
    pub count: usize,
    pub points_per_part: usize,
    pub parts: Option<usize>,
    pub jitter: f64,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            family: Family::Chair,
            count: 10,
            points_per_part: 256,
            parts: None,
            jitter: 0.15,
            seed: 0,
            output: PathBuf::from("dataset"),
        }
    }
}

impl GenConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_config(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainDenoiserConfig {
    pub dataset: PathBuf,
    /// Checkpoint path; the loss curve and summary are written beside it.
    pub output: PathBuf,
    pub schedule: ScheduleParams,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for TrainDenoiserConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            output: PathBuf::from("denoiser.ckpt"),
            schedule: ScheduleParams::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl TrainDenoiserConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_config(path)
    }
}

/// Which denoiser drives an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DenoiserSpec {
    /// Per-scene oracle that memorizes the ground-truth render.
    Memorized {
        #[serde(default = "one")]
        strength: f64,
    },
    /// Per-scene analytic posterior of a kernel density on the ground-truth
    /// points; blind to point order.
    Kde { bandwidth: f64 },
    /// A trained tiny denoiser.
    Checkpoint { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        Self::Memorized { strength: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomLevel {
    pub max_angle: f64,
    pub trans_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub denoiser: DenoiserSpec,
    pub schedule: ScheduleParams,
    pub assembly: AssemblyConfig,
    pub level: LevelName,
    /// Used when `level` is `custom`.
    pub custom_level: Option<CustomLevel>,
    pub trials: usize,
    pub output: PathBuf,
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Write a PLY snapshot every k iterations (and of the initial state).
    pub snapshot_every: Option<usize>,
    pub metrics: MetricOptions,
    /// Only the first n scenes of the dataset.
    pub max_scenes: Option<usize>,
    /// Settings of the direct-optimization baseline.
    pub simple: SimpleParams,
    /// Schedule for the ancestral chain that draws the baseline's reference
    /// sample; `schedule` when absent. A long assembly schedule makes the
    /// full chain expensive, and the chain only needs to reach the data
    /// distribution.
    pub reference_schedule: Option<ScheduleParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            denoiser: DenoiserSpec::default(),
            schedule: ScheduleParams::default(),
            assembly: AssemblyConfig::default(),
            level: LevelName::Slight,
            custom_level: None,
            trials: 1,
            output: PathBuf::from("results"),
            seed: 0,
            workers: None,
            snapshot_every: None,
            metrics: MetricOptions::default(),
            max_scenes: None,
            simple: SimpleParams::default(),
            reference_schedule: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_config(path)
    }

    pub fn noise_level(&self) -> Result<NoiseLevel> {
        Ok(match self.level {
            LevelName::Slight => NoiseLevel::SLIGHT,
            LevelName::Moderate => NoiseLevel::MODERATE,
            LevelName::Substantial => NoiseLevel::SUBSTANTIAL,
            LevelName::Excessive => NoiseLevel::EXCESSIVE,
            LevelName::Custom => {
                let c = self
                    .custom_level
                    .ok_or_else(|| Error::Config("level custom needs custom_level".into()))?;
                NoiseLevel::custom(c.max_angle, c.trans_sigma)?
            }
        })
    }

    /// Checks values and that referenced paths exist.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        if !self.dataset.is_dir() {
            return Err(Error::Config(format!(
                "dataset directory {} does not exist",
                self.dataset.display()
            )));
        }
        match &self.denoiser {
            DenoiserSpec::Memorized { strength } if !(*strength > 0.0 && *strength <= 1.0) => {
                return Err(Error::Config(format!("memorized strength must lie in (0, 1], got {strength}")))
            }
            DenoiserSpec::Kde { bandwidth } if !(*bandwidth > 0.0 && bandwidth.is_finite()) => {
                return Err(Error::Config(format!("kde bandwidth must be positive, got {bandwidth}")))
            }
            DenoiserSpec::Checkpoint { path } if !path.is_file() => {
                return Err(Error::Config(format!("checkpoint {} does not exist", path.display())))
            }
            _ => {}
        }
        self.noise_level()?;
        self.simple.validate()?;
        self.metrics_threshold_ok()
    }

    fn metrics_threshold_ok(&self) -> Result<()> {
        if !(self.metrics.threshold > 0.0) {
            return Err(Error::Config("metric threshold must be positive".into()));
        }
        Ok(())
    }
}
