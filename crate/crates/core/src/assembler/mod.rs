//! The iterative noise → denoise → align loop.

mod collision;
mod config;
mod sds;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use collision::{coincident_count, push_away, total_coincident, CollisionEvent};
pub use config::{AlignMode, AssemblyConfig, CollisionConfig, PushTrigger};
pub use sds::{sds_gradient, PartGradient, SdsGradients};

use crate::diffusion::{denoise_estimate, forward_noise, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::geometry::{align_or_translate, chamfer, compose, icp_align_traced, Pose, Scene};

/// State after one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub poses: Vec<Pose>,
    /// RMS alignment residual per part.
    pub residuals: Vec<f64>,
    /// Parts aligned by translation only.
    pub fallback: Vec<usize>,
    /// Chamfer between the rendered scene and the denoised target; absent
    /// for the initial state.
    pub target_chamfer: Option<f64>,
    pub collisions: Vec<CollisionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub initial: Vec<Pose>,
    pub steps: Vec<StepRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Poses at iteration `k`, where 0 is the initial state.
    pub fn poses_at(&self, k: usize) -> Option<&[Pose]> {
        if k == 0 {
            Some(&self.initial)
        } else {
            self.steps.get(k - 1).map(|s| s.poses.as_slice())
        }
    }

    /// One JSON object per line: the initial state (iteration 0, no
    /// residuals) followed by each step.
    pub fn to_jsonl(&self) -> String {
        let initial = StepRecord {
            iteration: 0,
            poses: self.initial.clone(),
            residuals: Vec::new(),
            fallback: Vec::new(),
            target_chamfer: None,
            collisions: Vec::new(),
        };
        let mut out = String::new();
        for rec in std::iter::once(&initial).chain(&self.steps) {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut initial = None;
        let mut steps = Vec::new();
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: StepRecord = serde_json::from_str(line)
                .map_err(|e| Error::InvalidInput(format!("trace line {}: {e}", lineno + 1)))?;
            if rec.iteration == 0 {
                initial = Some(rec.poses);
            } else {
                steps.push(rec);
            }
        }
        Ok(Self {
            initial: initial
                .ok_or_else(|| Error::InvalidInput("trace has no initial record".into()))?,
            steps,
        })
    }
}

/// One outer iteration on `scene` (1-based `iteration` selects whether the
/// collision check runs).
pub fn assemble_step(
    scene: &Scene,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    cfg: &AssemblyConfig,
    iteration: usize,
    rng: &mut impl Rng,
) -> Result<(Scene, StepRecord)> {
    let current = scene.render();
    let (noisy, _) = forward_noise(&current, schedule, cfg.z, rng)?;
    let target = denoise_estimate(&noisy, denoiser, scene.label(), cfg.z, cfg.denoise_mode, schedule)?;
    let target_chamfer = chamfer(&current, &target);

    let mut poses = Vec::with_capacity(scene.len());
    let mut residuals = Vec::with_capacity(scene.len());
    let mut fallback = Vec::new();
    for (k, (part, range)) in scene.parts().iter().zip(scene.part_ranges()).enumerate() {
        let src = current.slice(range.clone())?;
        let dst = target.slice(range)?;
        let (alignment, fb) = match cfg.align_mode {
            AlignMode::Kabsch => align_or_translate(&src, &dst)?,
            AlignMode::Icp => {
                let out = icp_align_traced(&src, &dst, cfg.icp_max_iters, cfg.icp_tol)?;
                (out.alignment, out.fallback)
            }
        };
        if fb {
            fallback.push(k);
        }
        residuals.push(alignment.residual);
        poses.push(compose(&alignment.pose(), part.pose()));
    }

    let mut next = scene.with_poses(&poses)?;
    let mut collisions = Vec::new();
    if cfg.collision.runs_at(iteration) {
        let (pushed, events) = push_away(&next, &cfg.collision);
        next = pushed;
        collisions = events;
    }
    let record = StepRecord {
        iteration,
        poses: next.poses(),
        residuals,
        fallback,
        target_chamfer: Some(target_chamfer),
        collisions,
    };
    Ok((next, record))
}

/// Runs `cfg.iterations` steps. On failure the error is returned together
/// with the trace up to the failing step.
pub fn assemble(
    scene: &Scene,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    cfg: &AssemblyConfig,
    rng: &mut impl Rng,
) -> std::result::Result<(Scene, IterationTrace), (Error, IterationTrace)> {
    let mut trace = IterationTrace {
        initial: scene.poses(),
        steps: Vec::with_capacity(cfg.iterations),
    };
    if let Err(e) = cfg.validate(schedule) {
        return Err((e, trace));
    }
    let mut current = scene.clone();
    for it in 1..=cfg.iterations {
        match assemble_step(&current, denoiser, schedule, cfg, it, rng) {
            Ok((next, record)) => {
                current = next;
                trace.steps.push(record);
            }
            Err(e) => return Err((e, trace)),
        }
    }
    Ok((current, trace))
}
