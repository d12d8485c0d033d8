use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use assembloid::assembler::{AlignMode, PushTrigger};
use assembloid::datagen::{Family, LevelName};
use assembloid::diffusion::DenoiseMode;
use assembloid::harness::{self, ExperimentConfig, GenConfig, TrainDenoiserConfig, OUTPUT_ROOT_ENV};
use assembloid::metrics::{MetricOptions, RotationMetric};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Zero-shot rigid part assembly with a point-cloud denoiser.
#[derive(Parser)]
#[command(name = "assembloid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of ground-truth scenes.
    Gen(GenArgs),
    /// Train the tiny denoiser on a dataset.
    TrainDenoiser(TrainArgs),
    /// Perturb and reassemble every scene of a dataset.
    Assemble(RunArgs),
    /// Run the direct pose-optimization baseline on the same inputs.
    Baseline(RunArgs),
    /// Score predicted scenes against ground truth.
    Evaluate(EvaluateArgs),
    /// Render metric curves of a results directory as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    parts: Option<usize>,
    #[arg(long)]
    points_per_part: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Checkpoint file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long, value_enum)]
    denoise_mode: Option<DenoiseArg>,
    #[arg(long, value_enum)]
    align_mode: Option<AlignArg>,
    #[arg(long, value_enum)]
    push_trigger: Option<TriggerArg>,
    #[arg(long, value_enum)]
    level: Option<LevelArg>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Outer iteration count.
    #[arg(long)]
    iterations: Option<usize>,
    /// Enable collision push-away.
    #[arg(long)]
    collisions: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "evaluation")]
    out: PathBuf,
    #[arg(long, default_value_t = assembloid::metrics::DEFAULT_PA_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "geodesic")]
    rotation_metric: RotationArg,
}

#[derive(Args)]
struct PlotArgs {
    /// Output directory of an assemble run.
    results: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Chair,
    Table,
    Airplane,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenoiseArg {
    Literal,
    Ddpm,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignArg {
    Kabsch,
    Icp,
}

#[derive(Clone, Copy, ValueEnum)]
enum TriggerArg {
    Above,
    Below,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Slight,
    Moderate,
    Substantial,
    Excessive,
}

#[derive(Clone, Copy, ValueEnum)]
enum RotationArg {
    Geodesic,
    Euler,
}

fn out_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn gen(args: GenArgs) -> anyhow::Result<u8> {
    let mut cfg = match &args.config {
        Some(p) => GenConfig::load(p)?,
        None => GenConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.count {
        cfg.count = c;
    }
    if let Some(f) = args.family {
        cfg.family = match f {
            FamilyArg::Chair => Family::Chair,
            FamilyArg::Table => Family::Table,
            FamilyArg::Airplane => Family::Airplane,
        };
    }
    if args.parts.is_some() {
        cfg.parts = args.parts;
    }
    if let Some(n) = args.points_per_part {
        cfg.points_per_part = n;
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    print_json(&harness::cmd_gen(&cfg, out_root().as_deref())?)?;
    Ok(0)
}

fn train(args: TrainArgs) -> anyhow::Result<u8> {
    let mut cfg = match &args.config {
        Some(p) => TrainDenoiserConfig::load(p)?,
        None => TrainDenoiserConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    print_json(&harness::cmd_train_denoiser(&cfg, out_root().as_deref())?)?;
    Ok(0)
}

fn experiment(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if args.snapshot_every.is_some() {
        cfg.snapshot_every = args.snapshot_every;
    }
    if let Some(m) = args.denoise_mode {
        cfg.assembly.denoise_mode = match m {
            DenoiseArg::Literal => DenoiseMode::Literal,
            DenoiseArg::Ddpm => DenoiseMode::Ddpm,
        };
    }
    if let Some(m) = args.align_mode {
        cfg.assembly.align_mode = match m {
            AlignArg::Kabsch => AlignMode::Kabsch,
            AlignArg::Icp => AlignMode::Icp,
        };
    }
    if let Some(t) = args.push_trigger {
        cfg.assembly.collision.trigger = match t {
            TriggerArg::Above => PushTrigger::Above,
            TriggerArg::Below => PushTrigger::Below,
        };
    }
    if let Some(l) = args.level {
        cfg.level = match l {
            LevelArg::Slight => LevelName::Slight,
            LevelArg::Moderate => LevelName::Moderate,
            LevelArg::Substantial => LevelName::Substantial,
            LevelArg::Excessive => LevelName::Excessive,
        };
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.iterations {
        cfg.assembly.iterations = t;
    }
    if args.collisions {
        cfg.assembly.collision.enabled = true;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn run(args: RunArgs, baseline: bool) -> anyhow::Result<u8> {
    let cfg = experiment(&args)?;
    let root = out_root();
    let summary = if baseline {
        harness::cmd_baseline(&cfg, root.as_deref())?
    } else {
        harness::cmd_assemble(&cfg, root.as_deref())?
    };
    print_json(&summary)?;
    Ok(harness::exit_code(summary.runs, summary.failed.len()) as u8)
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<u8> {
    let opts = MetricOptions {
        threshold: args.threshold,
        rotation: match args.rotation_metric {
            RotationArg::Geodesic => RotationMetric::Geodesic,
            RotationArg::Euler => RotationMetric::Euler,
        },
    };
    let summary = harness::cmd_evaluate(&args.pred, &args.gt, &args.out, &opts, out_root().as_deref())
        .with_context(|| format!("evaluating {} against {}", args.pred.display(), args.gt.display()))?;
    let code = if summary.scenes.is_empty() {
        1
    } else if summary.missing.is_empty() {
        0
    } else {
        2
    };
    print_json(&summary)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::TrainDenoiser(a) => train(a),
        Command::Assemble(a) => run(a, false),
        Command::Baseline(a) => run(a, true),
        Command::Evaluate(a) => evaluate(a),
        Command::Plot(a) => harness::cmd_plot(&a.results)
            .map_err(anyhow::Error::from)
            .and_then(|s| print_json(&s).map(|_| 0)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
