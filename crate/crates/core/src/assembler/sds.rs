use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::process::{checked_predict, estimate_from_prediction};
use crate::diffusion::{forward_noise, DenoiseMode, Denoiser, NoiseSchedule};
use crate::error::Result;
use crate::geometry::{PointCloud, Scene};

/// Gradient with respect to one part's affine transform `p ↦ M p + t`,
/// evaluated at `M = I, t = 0` on the placed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartGradient {
    pub linear: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdsGradients {
    /// From the noise residual `ε̂ − ε`, with `ε = P_{t,z} − P_t`.
    pub from_noise: Vec<PartGradient>,
    /// From the clean-target residual `P_t − P*`.
    pub from_target: Vec<PartGradient>,
    /// The frozen target `P*`.
    pub target: PointCloud,
}

fn per_part(scene: &Scene, placed: &PointCloud, residual: &[Vector3<f64>], w: f64) -> Vec<PartGradient> {
    scene
        .part_ranges()
        .into_iter()
        .map(|r| {
            let mut linear = Matrix3::zeros();
            let mut translation = Vector3::zeros();
            for k in r {
                let g = residual[k] * w;
                translation += g;
                linear += g * placed.points()[k].coords.transpose();
            }
            PartGradient {
                linear,
                translation,
            }
        })
        .collect()
}

/// Score-distillation gradient of the per-part transforms, by two routes
/// that agree algebraically under a shared noise draw.
pub fn sds_gradient(
    scene: &Scene,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    z: usize,
    w: f64,
    rng: &mut impl Rng,
) -> Result<SdsGradients> {
    let placed = scene.render();
    let (noisy, _) = forward_noise(&placed, schedule, z, rng)?;
    let eps_hat = checked_predict(&noisy, denoiser, scene.label(), z, schedule)?;
    let target = estimate_from_prediction(&noisy, &eps_hat, z, DenoiseMode::Literal, schedule)?;

    let noise_residual: Vec<Vector3<f64>> = eps_hat
        .iter()
        .zip(noisy.points().iter().zip(placed.points()))
        .map(|(e_hat, (x, p))| e_hat - (x - p))
        .collect();
    let target_residual: Vec<Vector3<f64>> = placed
        .points()
        .iter()
        .zip(target.points())
        .map(|(p, t)| p - t)
        .collect();

    Ok(SdsGradients {
        from_noise: per_part(scene, &placed, &noise_residual, w),
        from_target: per_part(scene, &placed, &target_residual, w),
        target,
    })
}
