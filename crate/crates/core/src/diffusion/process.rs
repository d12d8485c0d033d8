use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffusion::{DenoiseMode, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub(crate) fn standard_normal_vec(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Draws `x_z = α_z x + σ_z ε` with `ε ~ N(0, I)` per coordinate. Returns the
/// noisy cloud and the exact `ε` used.
///
/// Step 0 is the clean endpoint and returns the input unchanged (noise is
/// still drawn so the RNG stream does not depend on `z`).
pub fn forward_noise(
    cloud: &PointCloud,
    schedule: &NoiseSchedule,
    z: usize,
    rng: &mut impl Rng,
) -> Result<(PointCloud, Vec<Vector3<f64>>)> {
    schedule.check_step(z)?;
    let (alpha, sigma) = (schedule.alpha(z), schedule.sigma(z));
    let eps: Vec<Vector3<f64>> = (0..cloud.len()).map(|_| standard_normal_vec(rng)).collect();
    if sigma == 0.0 && alpha == 1.0 {
        return Ok((cloud.clone(), eps));
    }
    let noisy = cloud
        .points()
        .iter()
        .zip(&eps)
        .map(|(p, e)| Point3::from(p.coords * alpha + e * sigma))
        .collect();
    Ok((PointCloud::new(noisy)?, eps))
}

/// One denoising step: turns the denoiser's noise prediction into a clean
/// estimate with the same point order.
pub fn denoise_estimate(
    noisy: &PointCloud,
    denoiser: &dyn Denoiser,
    label: &str,
    z: usize,
    mode: DenoiseMode,
    schedule: &NoiseSchedule,
) -> Result<PointCloud> {
    let eps_hat = checked_predict(noisy, denoiser, label, z, schedule)?;
    estimate_from_prediction(noisy, &eps_hat, z, mode, schedule)
}

pub(crate) fn checked_predict(
    noisy: &PointCloud,
    denoiser: &dyn Denoiser,
    label: &str,
    z: usize,
    schedule: &NoiseSchedule,
) -> Result<Vec<Vector3<f64>>> {
    schedule.check_step(z)?;
    let eps_hat = denoiser.predict(noisy, label, z, schedule)?;
    if eps_hat.len() != noisy.len() {
        return Err(Error::InterfaceViolation(format!(
            "{} returned {} predictions for {} points",
            denoiser.name(),
            eps_hat.len(),
            noisy.len()
        )));
    }
    if eps_hat.iter().any(|e| !e.iter().all(|c| c.is_finite())) {
        return Err(Error::InterfaceViolation(format!(
            "{} returned a non-finite prediction",
            denoiser.name()
        )));
    }
    Ok(eps_hat)
}

pub(crate) fn estimate_from_prediction(
    noisy: &PointCloud,
    eps_hat: &[Vector3<f64>],
    z: usize,
    mode: DenoiseMode,
    schedule: &NoiseSchedule,
) -> Result<PointCloud> {
    let points = match mode {
        DenoiseMode::Literal => noisy
            .points()
            .iter()
            .zip(eps_hat)
            .map(|(x, e)| x - e)
            .collect(),
        DenoiseMode::Ddpm => {
            let (alpha, sigma) = (schedule.alpha(z), schedule.sigma(z));
            if alpha <= 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "step {z} carries no signal (alpha = 0); ddpm estimate undefined"
                )));
            }
            noisy
                .points()
                .iter()
                .zip(eps_hat)
                .map(|(x, e)| Point3::from((x.coords - e * sigma) / alpha))
                .collect()
        }
    };
    PointCloud::new(points)
}

/// Ancestral sampling from the Gaussian prior through all `Z` reverse steps.
///
/// Each step forms the denoiser's clean estimate (in its native mode) and
/// draws from the Gaussian reverse transition whose variance is set by the
/// schedule; the last step is noise-free.
pub fn sample(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    label: &str,
    n_points: usize,
    rng: &mut impl Rng,
) -> Result<PointCloud> {
    if n_points == 0 {
        return Err(Error::InvalidInput("cannot sample an empty cloud".into()));
    }
    let mode = denoiser.native_mode();
    let mut x = PointCloud::new(
        (0..n_points)
            .map(|_| Point3::from(standard_normal_vec(rng)))
            .collect(),
    )?;
    for z in (1..=schedule.steps()).rev() {
        let x0 = denoise_estimate(&x, denoiser, label, z, mode, schedule)?;
        let (coef_xz, coef_x0, var) = schedule.reverse_coefficients(z);
        let std = var.sqrt();
        let next = x
            .points()
            .iter()
            .zip(x0.points())
            .map(|(xz, x0)| {
                let mean = xz.coords * coef_xz + x0.coords * coef_x0;
                if std > 0.0 {
                    Point3::from(mean + standard_normal_vec(rng) * std)
                } else {
                    Point3::from(mean)
                }
            })
            .collect();
        x = PointCloud::new(next)?;
    }
    Ok(x)
}
