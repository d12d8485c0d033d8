use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembler::{assemble, total_coincident, IterationTrace};
use crate::baselines::{simple_optimize, SimpleConfig};
use crate::datagen::{perturb, NoiseLevel};
use crate::diffusion::{
    load_checkpoint, sample, Denoiser, MemorizedShapeDenoiser, NoiseSchedule, PointKdeDenoiser,
    TinyDenoiser,
};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::harness::{
    column_means, resolve_output, trial_seed, DenoiserSpec, ExperimentConfig, TableMeans,
};
use crate::io::{ensure_dir, list_scenes, read_scene, write_json, write_ply, write_scene, PlyFormat};
use crate::metrics::{evaluate, format_row, MetricsReport, TABLE_HEADER};

/// Trial index reserved for the baseline's reference sample.
const REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub scene: String,
    pub trial: usize,
    pub seed: u64,
    pub level: NoiseLevel,
    pub denoiser: DenoiserSpec,
    pub iterations: usize,
    /// Metrics of the perturbed input.
    pub initial: MetricsReport,
    pub metrics: MetricsReport,
    /// Final metrics in display units.
    pub table: TableMeans,
    /// Coincident points over all ordered part pairs of the final scene.
    pub coincident_points: usize,
    pub coincidence_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub scene: String,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub output: PathBuf,
    pub runs: usize,
    pub succeeded: usize,
    pub failed: Vec<TrialFailure>,
    pub aggregate: Option<TableMeans>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Assembler,
    Simple,
}

struct Job<'a> {
    id: &'a str,
    gt: &'a Scene,
    trial: usize,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    schedule: NoiseSchedule,
    reference_schedule: NoiseSchedule,
    level: NoiseLevel,
    checkpoint: Option<Arc<TinyDenoiser>>,
    out: PathBuf,
}

fn build_denoiser(ctx: &Context<'_>, gt: &Scene) -> Result<Box<dyn Denoiser>> {
    Ok(match &ctx.cfg.denoiser {
        DenoiserSpec::Memorized { strength } => Box::new(
            MemorizedShapeDenoiser::new(gt.render())
                .with_strength(*strength)?
                .with_label(gt.label()),
        ),
        DenoiserSpec::Kde { bandwidth } => {
            Box::new(PointKdeDenoiser::new(gt.render(), *bandwidth)?.with_label(gt.label()))
        }
        DenoiserSpec::Checkpoint { .. } => {
            let model = ctx.checkpoint.as_ref().expect("checkpoint loaded up front");
            if model.label() != gt.label() {
                return Err(Error::InvalidInput(format!(
                    "checkpoint trained on {:?}, scene is {:?}",
                    model.label(),
                    gt.label()
                )));
            }
            Box::new(SharedTiny(Arc::clone(model)))
        }
    })
}

struct SharedTiny(Arc<TinyDenoiser>);

impl Denoiser for SharedTiny {
    fn predict(
        &self,
        noisy: &crate::geometry::PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<nalgebra::Vector3<f64>>> {
        self.0.predict(noisy, label, step, schedule)
    }

    fn native_mode(&self) -> crate::diffusion::DenoiseMode {
        self.0.native_mode()
    }

    fn name(&self) -> &'static str {
        self.0.name()
    }
}

fn run_dir(out: &Path, id: &str, trial: usize) -> PathBuf {
    out.join("runs").join(id).join(format!("trial_{trial}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn curve_csv(gt: &Scene, trace: &IterationTrace, ctx: &Context<'_>) -> Result<String> {
    let mut csv = format!("iteration,{TABLE_HEADER},target_chamfer\n");
    for k in 0..=trace.len() {
        let poses = trace.poses_at(k).expect("k within trace");
        let m = evaluate(&gt.with_poses(poses)?, gt, &ctx.cfg.metrics)?;
        let tc = if k == 0 {
            String::new()
        } else {
            trace.steps[k - 1].target_chamfer.map_or(String::new(), |c| format!("{c}"))
        };
        csv.push_str(&format!("{k},{},{tc}\n", m.table_row()));
    }
    Ok(csv)
}

fn run_job(ctx: &Context<'_>, job: &Job<'_>, method: Method) -> Result<RunReport> {
    let seed = trial_seed(ctx.cfg.seed, job.id, job.trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = perturb(job.gt, &ctx.level, &mut rng);
    let denoiser = build_denoiser(ctx, job.gt)?;
    let dir = run_dir(&ctx.out, job.id, job.trial);
    ensure_dir(&dir)?;

    let (fin, iterations) = match method {
        Method::Assembler => {
            let mut acfg = ctx.cfg.assembly;
            acfg.seed = seed;
            let (fin, trace) = match assemble(&input, denoiser.as_ref(), &ctx.schedule, &acfg, &mut rng) {
                Ok(r) => r,
                Err((e, trace)) => {
                    write_text(&dir.join("trace.jsonl"), &trace.to_jsonl())?;
                    return Err(e);
                }
            };
            write_text(&dir.join("trace.jsonl"), &trace.to_jsonl())?;
            write_text(&dir.join("curve.csv"), &curve_csv(job.gt, &trace, ctx)?)?;
            if let Some(every) = ctx.cfg.snapshot_every {
                let snaps = dir.join("snapshots");
                ensure_dir(&snaps)?;
                for k in (0..=trace.len()).step_by(every) {
                    let scene = job.gt.with_poses(trace.poses_at(k).expect("k within trace"))?;
                    write_ply(&snaps.join(format!("iter_{k:04}.ply")), &scene.render(), PlyFormat::BinaryLittleEndian)?;
                }
            }
            (fin, trace.len())
        }
        Method::Simple => {
            let mut ref_rng = ChaCha8Rng::seed_from_u64(trial_seed(ctx.cfg.seed, job.id, REFERENCE_STREAM));
            let reference = sample(
                denoiser.as_ref(),
                &ctx.reference_schedule,
                job.gt.label(),
                job.gt.total_points(),
                &mut ref_rng,
            )?;
            let scfg = SimpleConfig {
                params: ctx.cfg.simple,
                reference,
            };
            let (fin, outcome) = simple_optimize(&input, &scfg)?;
            let mut csv = String::from("iteration,loss,best\n");
            for (k, (l, b)) in outcome.loss.iter().zip(&outcome.best).enumerate() {
                csv.push_str(&format!("{k},{l},{b}\n"));
            }
            write_text(&dir.join("loss.csv"), &csv)?;
            (fin, outcome.loss.len().saturating_sub(1))
        }
    };

    let metrics = evaluate(&fin, job.gt, &ctx.cfg.metrics)?;
    let radius = ctx.cfg.assembly.collision.radius;
    let report = RunReport {
        method: match method {
            Method::Assembler => "assembler",
            Method::Simple => "simple",
        }
        .into(),
        scene: job.id.to_string(),
        trial: job.trial,
        seed,
        level: ctx.level,
        denoiser: ctx.cfg.denoiser.clone(),
        iterations,
        initial: evaluate(&input, job.gt, &ctx.cfg.metrics)?,
        table: metrics.table_values().into(),
        metrics,
        coincident_points: total_coincident(&fin, radius),
        coincidence_radius: radius,
    };
    write_json(&dir.join("report.json"), &report)?;
    write_scene(
        &ctx.out.join("predictions").join(format!("trial_{}", job.trial)).join(job.id),
        &fin,
        job.id,
        Some(seed),
        None,
    )?;
    Ok(report)
}

fn run_batch(cfg: &ExperimentConfig, out_root: Option<&Path>, method: Method) -> Result<RunSummary> {
    cfg.validate()?;
    let schedule = NoiseSchedule::try_from(cfg.schedule)?;
    if method == Method::Assembler {
        cfg.assembly.validate(&schedule)?;
    }
    let checkpoint = match &cfg.denoiser {
        DenoiserSpec::Checkpoint { path } => Some(Arc::new(load_checkpoint(path)?)),
        _ => None,
    };
    let out = resolve_output(out_root, &cfg.output);
    ensure_dir(&out)?;
    write_json(&out.join("config.json"), cfg)?;

    let mut ids = list_scenes(&cfg.dataset)?;
    if let Some(n) = cfg.max_scenes {
        ids.truncate(n);
    }
    let mut scenes = Vec::with_capacity(ids.len());
    let mut failures = Vec::new();
    for id in &ids {
        match read_scene(&cfg.dataset.join(id)) {
            Ok((s, _)) => scenes.push((id.clone(), Some(s))),
            Err(e) => {
                log::error!("scene {id}: {e}");
                scenes.push((id.clone(), None));
            }
        }
    }

    let ctx = Context {
        cfg,
        reference_schedule: match cfg.reference_schedule {
            Some(p) => NoiseSchedule::try_from(p)?,
            None => schedule.clone(),
        },
        schedule,
        level: cfg.noise_level()?,
        checkpoint,
        out: out.clone(),
    };
    let mut jobs = Vec::new();
    for (id, scene) in &scenes {
        for trial in 0..cfg.trials {
            match scene {
                Some(gt) => jobs.push(Job { id, gt, trial }),
                None => failures.push(TrialFailure {
                    scene: id.clone(),
                    trial,
                    error: "scene could not be loaded".into(),
                }),
            }
        }
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunReport>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(&ctx, j, method)).collect());

    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut csv = format!("scene,trial,{TABLE_HEADER}\n");
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => {
                let v = r.metrics.table_values();
                csv.push_str(&format!("{},{},{}\n", r.scene, r.trial, format_row(&v)));
                rows.push(v);
                reports.push(r);
            }
            Err(e) => {
                log::error!("scene {} trial {}: {e}", job.id, job.trial);
                failures.push(TrialFailure {
                    scene: job.id.to_string(),
                    trial: job.trial,
                    error: e.to_string(),
                });
            }
        }
    }
    failures.sort_by(|a, b| (&a.scene, a.trial).cmp(&(&b.scene, b.trial)));
    write_text(&out.join("results.csv"), &csv)?;
    let means = column_means(&rows);
    let mut agg = format!("{TABLE_HEADER},runs\n");
    if let Some(m) = means {
        agg.push_str(&format!("{},{}\n", format_row(&m), rows.len()));
    }
    write_text(&out.join("aggregate.csv"), &agg)?;

    let summary = RunSummary {
        command: match method {
            Method::Assembler => "assemble",
            Method::Simple => "baseline",
        }
        .into(),
        output: out.clone(),
        runs: ids.len() * cfg.trials,
        succeeded: reports.len(),
        failed: failures,
        aggregate: means.map(TableMeans::from),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Perturbs every dataset scene once per trial and assembles it.
pub fn cmd_assemble(cfg: &ExperimentConfig, out_root: Option<&Path>) -> Result<RunSummary> {
    run_batch(cfg, out_root, Method::Assembler)
}

/// Same inputs as [`cmd_assemble`], optimized directly against a reference
/// sample drawn from the configured denoiser.
pub fn cmd_baseline(cfg: &ExperimentConfig, out_root: Option<&Path>) -> Result<RunSummary> {
    run_batch(cfg, out_root, Method::Simple)
}
