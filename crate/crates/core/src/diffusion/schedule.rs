use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_SIGMA_MAX: f64 = 0.99;

/// Variance-preserving noise schedule indexed by step `0..=Z`.
///
/// Step 0 is the clean endpoint (`σ = 0`, `α = 1`); every step satisfies
/// `α² + σ² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleParams", into = "ScheduleParams")]
pub struct NoiseSchedule {
    sigma_max: f64,
    sigma: Vec<f64>,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub steps: usize,
    pub sigma_max: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            sigma_max: DEFAULT_SIGMA_MAX,
        }
    }
}

impl TryFrom<ScheduleParams> for NoiseSchedule {
    type Error = Error;

    fn try_from(p: ScheduleParams) -> Result<Self> {
        linear_schedule(p.steps, p.sigma_max)
    }
}

impl From<NoiseSchedule> for ScheduleParams {
    fn from(s: NoiseSchedule) -> Self {
        s.params()
    }
}

/// Linear-in-variance schedule: `σ_z² = σ_max² · z / Z`.
pub fn linear_schedule(steps: usize, sigma_max: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidSchedule("step count must be at least 1".into()));
    }
    if !(sigma_max > 0.0 && sigma_max <= 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "sigma_max must lie in (0, 1], got {sigma_max}"
        )));
    }
    let var_max = sigma_max * sigma_max;
    let sigma: Vec<f64> = (0..=steps)
        .map(|z| (var_max * z as f64 / steps as f64).sqrt())
        .collect();
    let alpha = sigma.iter().map(|s| (1.0 - s * s).max(0.0).sqrt()).collect();
    Ok(NoiseSchedule {
        sigma_max,
        sigma,
        alpha,
    })
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        linear_schedule(DEFAULT_STEPS, DEFAULT_SIGMA_MAX).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    /// Total step count `Z`.
    pub fn steps(&self) -> usize {
        self.sigma.len() - 1
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn params(&self) -> ScheduleParams {
        ScheduleParams {
            steps: self.steps(),
            sigma_max: self.sigma_max,
        }
    }

    pub fn check_step(&self, z: usize) -> Result<()> {
        if z > self.steps() {
            return Err(Error::Step {
                step: z,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Panics when `z > Z`; call [`NoiseSchedule::check_step`] first on
    /// untrusted input.
    pub fn sigma(&self, z: usize) -> f64 {
        self.sigma[z]
    }

    pub fn alpha(&self, z: usize) -> f64 {
        self.alpha[z]
    }

    /// Mean coefficients and variance of the reverse transition
    /// `q(x_{z-1} | x_z, x_0)` implied by the marginals, for `z ≥ 1`.
    ///
    /// Returns `(coef_xz, coef_x0, variance)`. At `z = 1` the variance is 0
    /// and the mean is exactly the clean estimate.
    pub fn reverse_coefficients(&self, z: usize) -> (f64, f64, f64) {
        debug_assert!(z >= 1 && z <= self.steps());
        let (a_z, a_prev) = (self.alpha[z], self.alpha[z - 1]);
        let (s_z, s_prev) = (self.sigma[z], self.sigma[z - 1]);
        let var_z = s_z * s_z;
        let var_prev = s_prev * s_prev;
        // per-step transition x_z = a_step x_{z-1} + noise(var_step)
        let a_step = if a_prev > 0.0 { a_z / a_prev } else { 0.0 };
        let var_step = (var_z - a_step * a_step * var_prev).max(0.0);
        (
            a_step * var_prev / var_z,
            a_prev * var_step / var_z,
            var_step * var_prev / var_z,
        )
    }
}
