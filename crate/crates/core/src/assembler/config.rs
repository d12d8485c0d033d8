use serde::{Deserialize, Serialize};

use crate::diffusion::{DenoiseMode, NoiseSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    /// Index correspondence; closed form.
    #[default]
    Kabsch,
    /// Nearest-neighbour correspondence within each part's slice.
    Icp,
}

impl std::fmt::Display for AlignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlignMode::Kabsch => "kabsch",
            AlignMode::Icp => "icp",
        })
    }
}

impl std::str::FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kabsch" => Ok(Self::Kabsch),
            "icp" => Ok(Self::Icp),
            other => Err(Error::Config(format!("unknown align mode {other:?}"))),
        }
    }
}

/// When the push-away indicator fires for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PushTrigger {
    /// `count >= threshold`: separate parts that overlap.
    #[default]
    Above,
    /// `count < threshold`, the indicator read literally.
    Below,
}

impl std::fmt::Display for PushTrigger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PushTrigger::Above => "above",
            PushTrigger::Below => "below",
        })
    }
}

impl std::str::FromStr for PushTrigger {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "above" => Ok(Self::Above),
            "below" => Ok(Self::Below),
            other => Err(Error::Config(format!("unknown push trigger {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionConfig {
    pub enabled: bool,
    /// Two points coincide when they are at most this far apart.
    pub radius: f64,
    pub count_threshold: usize,
    /// Displacement scale `s`.
    pub scale: f64,
    pub trigger: PushTrigger,
    /// Run the check on every k-th iteration.
    pub every: usize,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            radius: 0.02,
            count_threshold: 4,
            scale: 0.25,
            trigger: PushTrigger::Above,
            every: 1,
        }
    }
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "collision radius must be positive, got {}",
                self.radius
            )));
        }
        if self.count_threshold == 0 {
            return Err(Error::Config("collision count_threshold must be >= 1".into()));
        }
        if !self.scale.is_finite() {
            return Err(Error::Config("collision scale must be finite".into()));
        }
        if self.every == 0 {
            return Err(Error::Config("collision every must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether the check runs after iteration `iteration` (1-based).
    pub fn runs_at(&self, iteration: usize) -> bool {
        self.enabled && iteration % self.every == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssemblyConfig {
    /// Outer iteration count `T`.
    pub iterations: usize,
    /// Diffusion step used in every iteration.
    pub z: usize,
    pub align_mode: AlignMode,
    pub denoise_mode: DenoiseMode,
    pub collision: CollisionConfig,
    pub seed: u64,
    pub icp_max_iters: usize,
    pub icp_tol: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            z: 2,
            align_mode: AlignMode::Kabsch,
            denoise_mode: DenoiseMode::Literal,
            collision: CollisionConfig::default(),
            seed: 0,
            icp_max_iters: 20,
            icp_tol: 1e-10,
        }
    }
}

impl AssemblyConfig {
    /// Checks the config against `schedule`; logs a warning when `z` is
    /// large relative to the schedule length.
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.z == 0 {
            return Err(Error::Config("assembly step z must be >= 1".into()));
        }
        schedule.check_step(self.z)?;
        if self.icp_max_iters == 0 {
            return Err(Error::Config("icp_max_iters must be >= 1".into()));
        }
        self.collision.validate()?;
        if self.z * 10 > schedule.steps() {
            log::warn!(
                "assembly step z={} exceeds Z/10 (Z={}); alignment targets will be noisy",
                self.z,
                schedule.steps()
            );
        }
        Ok(())
    }
}
