use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::geometry::{dist2, KdTree, PointCloud};

/// How a noise prediction is turned into a clean-cloud estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiseMode {
    /// `P* = P_noisy − ε̂`, the one-line update used by the assembler.
    #[default]
    Literal,
    /// Standard clean estimate `x̂₀ = (P_noisy − σ_z ε̂) / α_z`.
    Ddpm,
}

impl std::fmt::Display for DenoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenoiseMode::Literal => "literal",
            DenoiseMode::Ddpm => "ddpm",
        })
    }
}

impl std::str::FromStr for DenoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "ddpm" => Ok(Self::Ddpm),
            other => Err(Error::Config(format!("unknown denoise mode {other:?}"))),
        }
    }
}

/// A noise predictor `ε̂(noisy, label, z)`.
///
/// Implementations must return exactly one finite vector per input point, in
/// input order. They are shared read-only across worker threads.
pub trait Denoiser: Send + Sync {
    fn predict(
        &self,
        noisy: &PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Vector3<f64>>>;

    /// The estimate mode the predictor's output is meant for.
    fn native_mode(&self) -> DenoiseMode {
        DenoiseMode::Ddpm
    }

    fn name(&self) -> &'static str;
}

fn check_label(expected: &Option<String>, got: &str) -> Result<()> {
    match expected {
        Some(l) if l != got => Err(Error::InvalidInput(format!(
            "denoiser serves label {l:?}, asked for {got:?}"
        ))),
        _ => Ok(()),
    }
}

/// Oracle that knows the target shape point-for-point.
///
/// Its prediction is `strength · (noisy − target)`, so a literal-mode
/// estimate is the blend `(1 − strength)·noisy + strength·target`; with the
/// default strength of 1 that is the target itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorizedShapeDenoiser {
    target: PointCloud,
    strength: f64,
    label: Option<String>,
}

impl MemorizedShapeDenoiser {
    pub fn new(target: PointCloud) -> Self {
        Self {
            target,
            strength: 1.0,
            label: None,
        }
    }

    pub fn with_strength(mut self, strength: f64) -> Result<Self> {
        if !(strength > 0.0 && strength <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "blend strength must lie in (0, 1], got {strength}"
            )));
        }
        self.strength = strength;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
}

impl Denoiser for MemorizedShapeDenoiser {
    fn predict(
        &self,
        noisy: &PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Vector3<f64>>> {
        schedule.check_step(step)?;
        check_label(&self.label, label)?;
        if noisy.len() != self.target.len() {
            return Err(Error::InterfaceViolation(format!(
                "memorized target has {} points, input has {}",
                self.target.len(),
                noisy.len()
            )));
        }
        Ok(noisy
            .points()
            .iter()
            .zip(self.target.points())
            .map(|(x, t)| {
                let d = x - t;
                if self.strength == 1.0 {
                    d
                } else {
                    d * self.strength
                }
            })
            .collect())
    }

    fn native_mode(&self) -> DenoiseMode {
        DenoiseMode::Literal
    }

    fn name(&self) -> &'static str {
        "memorized"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mean: PointCloud,
    /// Isotropic per-coordinate variance of clean clouds around `mean`.
    pub variance: f64,
    pub weight: f64,
}

/// Exact posterior-mean noise predictor for a mixture of isotropic Gaussians
/// over whole clouds.
///
/// Clean data is `x₀ ~ Σ_k w_k N(μ_k, v_k I)`; under `x_z = α x₀ + σ ε` the
/// prediction is `E[ε | x_z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureDenoiser {
    components: Vec<MixtureComponent>,
    label: Option<String>,
}

impl GaussianMixtureDenoiser {
    /// Weights are normalized to sum to one.
    pub fn new(mut components: Vec<MixtureComponent>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        };
        let n = first.mean.len();
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != n {
                return Err(Error::InvalidInput(format!(
                    "component {k} has {} points, expected {n}",
                    c.mean.len()
                )));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::InvalidInput(format!("component {k} variance must be > 0")));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidInput(format!("component {k} weight must be > 0")));
            }
            total += c.weight;
        }
        for c in &mut components {
            c.weight /= total;
        }
        Ok(Self {
            components,
            label: None,
        })
    }

    pub fn single(mean: PointCloud, variance: f64) -> Result<Self> {
        Self::new(vec![MixtureComponent {
            mean,
            variance,
            weight: 1.0,
        }])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn n_points(&self) -> usize {
        self.components[0].mean.len()
    }
}

impl Denoiser for GaussianMixtureDenoiser {
    fn predict(
        &self,
        noisy: &PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Vector3<f64>>> {
        schedule.check_step(step)?;
        check_label(&self.label, label)?;
        let n = self.n_points();
        if noisy.len() != n {
            return Err(Error::InterfaceViolation(format!(
                "mixture models {n}-point clouds, input has {}",
                noisy.len()
            )));
        }
        let (alpha, sigma) = (schedule.alpha(step), schedule.sigma(step));
        let dims = 3.0 * n as f64;

        let log_resp: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let s = alpha * alpha * c.variance + sigma * sigma;
                let sq: f64 = noisy
                    .points()
                    .iter()
                    .zip(c.mean.points())
                    .map(|(x, m)| (x.coords - alpha * m.coords).norm_squared())
                    .sum();
                c.weight.ln() - 0.5 * sq / s - 0.5 * dims * (2.0 * std::f64::consts::PI * s).ln()
            })
            .collect();
        let max = log_resp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = log_resp.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = unnorm.iter().sum();

        let mut out = vec![Vector3::zeros(); n];
        for (c, u) in self.components.iter().zip(&unnorm) {
            let r = u / z;
            if r == 0.0 {
                continue;
            }
            let s = alpha * alpha * c.variance + sigma * sigma;
            let scale = r * sigma / s;
            for ((o, x), m) in out.iter_mut().zip(noisy.points()).zip(c.mean.points()) {
                *o += (x.coords - alpha * m.coords) * scale;
            }
        }
        Ok(out)
    }

    fn name(&self) -> &'static str {
        "gaussian-mixture"
    }
}

/// Exact posterior-mean noise predictor for a per-point kernel density.
///
/// Every clean point is drawn independently from
/// `(1/m) Σ_j N(c_j, h² I)` over the `m` kernel centres. Unlike the other
/// oracles it carries no point-index information: each noisy point is pulled
/// toward whatever part of the shape is near it, as a learned
/// point-cloud model would.
#[derive(Debug, Clone)]
pub struct PointKdeDenoiser {
    centers: PointCloud,
    bandwidth: f64,
    label: Option<String>,
}

/// Kernels whose log-weight trails the best one by more than this contribute
/// below double precision and are skipped.
const KDE_LOG_CUTOFF: f64 = 40.0;

impl PointKdeDenoiser {
    pub fn new(centers: PointCloud, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be > 0, got {bandwidth}"
            )));
        }
        Ok(Self {
            centers,
            bandwidth,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Posterior mean of the clean point given one noisy point.
    fn posterior_mean(
        &self,
        tree: &KdTree<'_>,
        x: &Point3<f64>,
        alpha: f64,
        s: f64,
        scratch: &mut Vec<usize>,
        dists: &mut Vec<f64>,
    ) -> Vector3<f64> {
        let centers = self.centers.points();
        // ‖x − α c‖² = α² ‖x/α − c‖²; search in centre space.
        let use_tree = alpha > 1e-6;
        if use_tree {
            let q = Point3::from(x.coords / alpha);
            let (_, d_min) = tree.nearest(&q).expect("non-empty");
            let r2 = d_min + 2.0 * KDE_LOG_CUTOFF * s / (alpha * alpha);
            tree.within(&q, r2, scratch);
        } else {
            scratch.clear();
            scratch.extend(0..centers.len());
        }
        dists.clear();
        dists.extend(
            scratch
                .iter()
                .map(|&j| dist2(x, &Point3::from(alpha * centers[j].coords))),
        );
        let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let mut wsum = 0.0;
        let mut acc = Vector3::zeros();
        for (&j, &d) in scratch.iter().zip(dists.iter()) {
            let w = (-(d - best) / (2.0 * s)).exp();
            wsum += w;
            acc += centers[j].coords * w;
        }
        acc / wsum
    }
}

impl Denoiser for PointKdeDenoiser {
    fn predict(
        &self,
        noisy: &PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Vector3<f64>>> {
        schedule.check_step(step)?;
        check_label(&self.label, label)?;
        let (alpha, sigma) = (schedule.alpha(step), schedule.sigma(step));
        if sigma == 0.0 {
            return Ok(vec![Vector3::zeros(); noisy.len()]);
        }
        let s = alpha * alpha * self.bandwidth * self.bandwidth + sigma * sigma;
        let tree = KdTree::build(self.centers.points());
        let (mut scratch, mut dists) = (Vec::new(), Vec::new());
        Ok(noisy
            .points()
            .iter()
            .map(|x| {
                let mean = self.posterior_mean(&tree, x, alpha, s, &mut scratch, &mut dists);
                (x.coords - alpha * mean) * (sigma / s)
            })
            .collect())
    }

    fn name(&self) -> &'static str {
        "point-kde"
    }
}
